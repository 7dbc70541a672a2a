"""Unitary preimages of stochastic matrices.

Given a stochastic ``gamma`` we look for a unitary ``U`` with
``|U_ij|**2 == gamma_ij``. Small cases are decided exactly (2x2 always works,
3x3 via the triangle condition on each pair of rows). Otherwise we minimize

    f(U) = sum_ij (|U_ij|**2 - target_ij)**2

over ``U = exp(i H)`` with ``H`` Hermitian, so every iterate is exactly
unitary. When no preimage exists the target is diluted into ``k * C``
configurations and the search repeated.
"""

from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatch, InvalidProblem, NotDoublyStochastic, NotUnitary
from .quantum import POLAR_LIMIT, Propagator, as_propagator, unitarity_defect
from .stochastic import EPS_STOCH, StochasticMatrix, validate_stochastic

EPS_GAUGE = 1e-12


# -- exact small-dimension tests ---------------------------------------------


@dataclass(frozen=True)
class ObstructionResult:
    status: str  # "unistochastic" | "obstructed" | "not-applicable"
    rows: tuple[int, int] | None = None
    gap: float = 0.0


def obstruction_test_3x3(gamma) -> ObstructionResult:
    """Decide unistochasticity of a 2x2 or 3x3 doubly stochastic matrix.

    Orthogonality of rows ``a`` and ``b`` of ``U`` requires three complex
    numbers of moduli ``m_j = sqrt(gamma_aj * gamma_bj)`` to sum to zero,
    i.e. to close a triangle. For 3x3 matrices this is also sufficient.
    """
    g = np.asarray(getattr(gamma, "entries", gamma), dtype=float)
    g = validate_stochastic(g).entries
    if np.abs(g.sum(axis=1) - 1.0).max() > EPS_STOCH:
        raise NotDoublyStochastic("row sums differ from 1")
    n = g.shape[0]
    if n > 3:
        return ObstructionResult("not-applicable")
    if n < 3:
        return ObstructionResult("unistochastic")
    worst = ObstructionResult("unistochastic")
    for a in range(3):
        for b in range(a + 1, 3):
            m = np.sqrt(g[a] * g[b])
            gap = float(m.max() - (m.sum() - m.max()))
            if gap > EPS_STOCH and gap > worst.gap:
                worst = ObstructionResult("obstructed", (a, b), gap)
    return worst


def dilute(gamma, k: int, scheme: str = "uniform") -> StochasticMatrix:
    """Spread each configuration over ``k`` sub-configurations.

    The uniform scheme sets ``new[(i, a), (j, b)] = gamma[i, j] / k`` with the
    composite index ``i * k + a``. Summing the sub-index ``a`` of any column
    ``(j, b)`` returns column ``j`` of ``gamma``.
    """
    if scheme != "uniform":
        raise ValueError(f"unknown dilution scheme {scheme!r}")
    if int(k) < 1:
        raise ValueError(f"dilution factor must be >= 1, got {k}")
    k = int(k)
    g = np.asarray(getattr(gamma, "entries", gamma), dtype=float)
    t = getattr(gamma, "time", 0.0)
    if k == 1:
        return validate_stochastic(g, time=t)
    return validate_stochastic(np.kron(g, np.full((k, k), 1.0 / k)), time=t)


def undilute(gamma_k, k: int) -> np.ndarray:
    """Sum rows within each block and average columns; inverts :func:`dilute`."""
    g = np.asarray(getattr(gamma_k, "entries", gamma_k), dtype=float)
    c = g.shape[0] // k
    return g.reshape(c, k, c, k).sum(axis=1).mean(axis=2)


# -- objective on the unitary group ----------------------------------------


def hermitian_from_params(x: np.ndarray, n: int) -> np.ndarray:
    """Real vector of length ``n**2`` -> Hermitian ``n x n`` matrix.

    Layout: ``n`` diagonal entries, then real parts, then imaginary parts of
    the strict upper triangle in row-major order.
    """
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    h = np.zeros((n, n), dtype=complex)
    h[np.diag_indices(n)] = x[:n]
    h[iu] = x[n : n + m] + 1j * x[n + m :]
    h[(iu[1], iu[0])] = np.conj(h[iu])
    return h


def params_from_hermitian(h: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    return np.concatenate([np.diag(h).real, h[iu].real, h[iu].imag])


def _unitary_from_params(x, n):
    h = hermitian_from_params(x, n)
    w, v = np.linalg.eigh(h)
    e = np.exp(1j * w)
    return (v * e) @ v.conj().T, w, v, e


def dilation_objective(x: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Residual and its exact gradient for ``U = exp(i H(x))``.

    With ``H = V diag(w) V^dagger`` the differential of the exponential is
    ``V (phi * (V^dagger i dH V)) V^dagger`` where ``phi`` holds the divided
    differences of ``exp(i w)``.
    """
    n = target.shape[0]
    u, w, v, e = _unitary_from_params(x, n)
    r = np.abs(u) ** 2 - target
    f = float(np.sum(r * r))
    g = 4.0 * r * u  # df = Re <g, dU>

    dw = w[:, None] - w[None, :]
    de = e[:, None] - e[None, :]
    close = np.abs(dw) < 1e-8
    safe = np.where(close, 1.0, dw)
    phi = np.where(close, e[:, None] * (1 + 0.5j * dw), de / (1j * safe)) * 1j
    # phi above already carries the factor i from d(iH)
    gt = v.conj().T @ g @ v
    z = gt * np.conj(phi)
    grad_h = v @ z @ v.conj().T
    grad_h = (grad_h + grad_h.conj().T) / 2

    iu = np.triu_indices(n, 1)
    grad = np.concatenate(
        [np.diag(grad_h).real, 2 * grad_h[iu].real, 2 * grad_h[iu].imag]
    )
    return f, grad


def residual(u, target) -> float:
    d = np.abs(np.asarray(u)) ** 2 - np.asarray(getattr(target, "entries", target))
    return float(np.sum(d * d))


# -- gauge ------------------------------------------------------------------


def _phase(z: complex) -> complex:
    return z / abs(z)


def fix_gauge(u, eps: float = EPS_GAUGE) -> Propagator:
    """Canonical representative under ``U -> D1 U D2`` (diagonal phases).

    Afterwards row 0 and column 0 are real and non-negative wherever their
    modulus exceeds ``eps``. Moduli are untouched and the map is idempotent.
    """
    prop = u if isinstance(u, Propagator) else as_propagator(u)
    m = np.array(prop.entries, dtype=complex)
    n = m.shape[0]
    right = np.ones(n, dtype=complex)
    left = np.ones(n, dtype=complex)
    if abs(m[0, 0]) > eps:
        right[0] = np.conj(_phase(m[0, 0]))
    for j in range(1, n):
        if abs(m[0, j]) > eps:
            right[j] = np.conj(_phase(m[0, j]))
    for i in range(1, n):
        z = m[i, 0] * right[0]
        if abs(z) > eps:
            left[i] = np.conj(_phase(z))
    out = left[:, None] * m * right[None, :]
    row = np.abs(out[0]) > eps
    col = np.abs(out[:, 0]) > eps
    out[0, row] = np.abs(out[0, row])
    out[col, 0] = np.abs(out[col, 0])
    return Propagator(out, prop.time)


# -- search -----------------------------------------------------------------


@dataclass(frozen=True)
class DilationProblem:
    target: StochasticMatrix
    max_dilation_factor: int = 4
    residual_tol: float = 1e-8
    restarts: int = 20
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.target, StochasticMatrix):
            try:
                object.__setattr__(self, "target", validate_stochastic(self.target))
            except ValueError as exc:
                raise InvalidProblem(f"target is not stochastic: {exc}") from exc
        if int(self.max_dilation_factor) < 1:
            raise InvalidProblem("max_dilation_factor must be >= 1")
        if not self.residual_tol > 0:
            raise InvalidProblem("residual_tol must be positive")
        if int(self.restarts) < 1:
            raise InvalidProblem("restarts must be >= 1")


@dataclass(frozen=True)
class FactorAttempt:
    k: int
    status: str  # "solved" | "unsolved" | "structurally-infeasible"
    best_residual: float
    restart_residuals: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class DilationSolution:
    status: str  # "converged" | "no-convergence"
    unitary: Propagator
    dilation_factor: int
    residual: float
    gauge_fixed: bool
    attempts: tuple[FactorAttempt, ...] = field(default=())

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _is_permutation(g: np.ndarray) -> bool:
    return bool(
        np.all((g == 0) | (g == 1)) and np.all(g.sum(axis=0) == 1) and np.all(g.sum(axis=1) == 1)
    )


def _local_search(target: np.ndarray, seed_seq: np.random.SeedSequence, max_iter: int):
    n = target.shape[0]
    rng = np.random.default_rng(seed_seq)
    x0 = rng.normal(scale=np.pi / 2, size=n * n)
    res = minimize(
        dilation_objective,
        x0,
        args=(target,),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "maxcor": 30, "ftol": 0.0, "gtol": 1e-14},
    )
    u, *_ = _unitary_from_params(res.x, n)
    return residual(u, target), u


def solve_unitary(problem: DilationProblem, workers: int = 1, max_iter: int = 3000) -> DilationSolution:
    """Search for a unitary preimage, diluting the target as needed.

    Every restart draws its start point from ``SeedSequence([seed, k, r])``,
    so results do not depend on ``workers``. At each ``k`` the restart with
    the lowest residual wins, ties going to the earliest restart; the lowest
    ``k`` meeting ``residual_tol`` is returned. Failure is reported through
    ``status == "no-convergence"`` with the best residual found.
    """
    g = problem.target.entries
    doubly = problem.target.is_doubly_stochastic()
    attempts: list[FactorAttempt] = []
    best: tuple[float, int, np.ndarray] | None = None

    if _is_permutation(g):
        u = g.astype(complex)
        attempts.append(FactorAttempt(1, "solved", 0.0, (0.0,)))
        return DilationSolution("converged", fix_gauge(u), 1, 0.0, True, tuple(attempts))

    for k in range(1, int(problem.max_dilation_factor) + 1):
        target = dilute(problem.target, k).entries
        if not doubly and k < problem.max_dilation_factor:
            # Uniform dilution preserves row sums, so |U|^2 (doubly stochastic)
            # cannot match; only the last factor is searched for a best effort.
            attempts.append(FactorAttempt(k, "structurally-infeasible", float("nan"), ()))
            continue
        seqs = [np.random.SeedSequence([int(problem.seed), k, r]) for r in range(problem.restarts)]
        if workers > 1:
            with cf.ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(lambda s: _local_search(target, s, max_iter), seqs))
        else:
            results = [_local_search(target, s, max_iter) for s in seqs]
        residuals = tuple(r for r, _ in results)
        i_best = int(np.argmin(residuals))
        r_best, u_best = results[i_best]
        solved = r_best <= problem.residual_tol
        status = "solved" if solved else ("unsolved" if doubly else "structurally-infeasible")
        attempts.append(FactorAttempt(k, status, r_best, residuals))
        if best is None or r_best < best[0]:
            best = (r_best, k, u_best)
        if solved:
            return DilationSolution("converged", fix_gauge(u_best), k, r_best, True, tuple(attempts))

    r_best, k_best, u_best = best
    return DilationSolution("no-convergence", fix_gauge(u_best), k_best, r_best, True, tuple(attempts))


def check_unitary_preimage(u, gamma, tol: float = 1e-8) -> bool:
    u = np.asarray(u)
    if unitarity_defect(u) > POLAR_LIMIT:
        raise NotUnitary("candidate is not unitary")
    g = np.asarray(getattr(gamma, "entries", gamma))
    if g.shape != u.shape:
        raise DimensionMismatch("shape mismatch")
    return residual(u, g) <= tol
