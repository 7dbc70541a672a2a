# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def env_marginal(double complex[:, ::1] amp, double complex[:, ::1] env):
    """p_i = sum_ab conj(amp[i,a]) amp[i,b] * sum_e conj(env[e,a]) env[e,b]."""
    cdef Py_ssize_t n = amp.shape[0], m = env.shape[0]
    cdef Py_ssize_t i, a, b, e
    cdef double complex s
    overlap_arr = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] ov = overlap_arr
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double acc
    for a in range(n):
        for b in range(a, n):
            s = 0
            for e in range(m):
                s = s + env[e, a].conjugate() * env[e, b]
            ov[a, b] = s
            ov[b, a] = s.conjugate()
    for i in range(n):
        acc = 0.0
        for a in range(n):
            s = 0
            for b in range(n):
                s = s + ov[a, b] * amp[i, b]
            acc += (amp[i, a].conjugate() * s).real
        out[i] = acc
    return out_arr


def count_injective(cnp.int64_t[:, ::1] maps, Py_ssize_t m):
    """Number of rows of ``maps`` whose entries are pairwise distinct."""
    cdef Py_ssize_t draws = maps.shape[0], n = maps.shape[1]
    cdef Py_ssize_t r, i, v
    cdef Py_ssize_t count = 0
    cdef bint ok
    stamp_arr = np.full(m, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] stamp = stamp_arr
    for r in range(draws):
        ok = True
        for i in range(n):
            v = maps[r, i]
            if stamp[v] == r:
                ok = False
                break
            stamp[v] = r
        if ok:
            count += 1
    return count


cdef inline void _force(double[:, ::1] y, double[:, ::1] f, double k, double lam) noexcept nogil:
    cdef Py_ssize_t s, d, S = y.shape[0], D = y.shape[1]
    cdef double r2
    for s in range(S):
        r2 = 0.0
        for d in range(D):
            r2 += y[s, d] * y[s, d]
        for d in range(D):
            f[s, d] = -(k + lam * r2) * y[s, d]


def polynomial_force(double[:, ::1] y, double k, double lam):
    out = np.empty((y.shape[0], y.shape[1]))
    _force(y, out, k, lam)
    return out


def verlet_ensemble(double[:, ::1] x, double[:, ::1] v, double[:, ::1] f,
                    double[:, :, ::1] jitter, double dt, double k, double lam, double mass):
    """Advance the ensemble ``jitter.shape[0]`` velocity-Verlet steps in place.

    ``f`` holds the force at the current (jittered) positions on entry and
    exit. Returns the ensemble mean position after each step.
    """
    cdef Py_ssize_t steps = jitter.shape[0], S = x.shape[0], D = x.shape[1]
    cdef Py_ssize_t n, s, d
    cdef double half = 0.5 * dt / mass
    cdef double r2, fn
    means_arr = np.zeros((steps, D))
    cdef double[:, ::1] means = means_arr
    with nogil:
        for n in range(steps):
            for s in range(S):
                for d in range(D):
                    v[s, d] += half * f[s, d]
                    x[s, d] += dt * v[s, d]
                r2 = 0.0
                for d in range(D):
                    r2 += (x[s, d] + jitter[n, s, d]) * (x[s, d] + jitter[n, s, d])
                for d in range(D):
                    fn = -(k + lam * r2) * (x[s, d] + jitter[n, s, d])
                    f[s, d] = fn
                    v[s, d] += half * fn
                    means[n, d] += x[s, d]
            for d in range(D):
                means[n, d] /= S
    return means_arr
