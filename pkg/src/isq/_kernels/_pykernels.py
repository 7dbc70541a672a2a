"""Pure numpy implementations of the hot kernels.

Same signatures and semantics as the compiled module; results agree to
floating-point reassociation.
"""

import numpy as np


def env_marginal(amp, env):
    overlap = env.conj().T @ env
    return np.einsum("ia,ab,ib->i", amp.conj(), overlap, amp).real


def count_injective(maps, m):
    if maps.shape[1] < 2:
        return maps.shape[0]
    s = np.sort(maps, axis=1)
    return int(np.count_nonzero(np.all(s[:, 1:] != s[:, :-1], axis=1)))


def polynomial_force(y, k, lam):
    r2 = np.einsum("sd,sd->s", y, y)
    return -(k + lam * r2)[:, None] * y


def verlet_ensemble(x, v, f, jitter, dt, k, lam, mass):
    half = 0.5 * dt / mass
    means = np.empty((jitter.shape[0], x.shape[1]))
    for n in range(jitter.shape[0]):
        v += half * f
        x += dt * v
        f[...] = polynomial_force(x + jitter[n], k, lam)
        v += half * f
        means[n] = x.mean(axis=0)
    return means
