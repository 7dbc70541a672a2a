"""Monte Carlo checks of the many-particle classical limit.

Particles are modelled as independent zero-mean random positions around the
centre of mass. Two single-particle laws are supported:

``gaussian``
    isotropic normal with *total* variance ``sigma0`` (``sigma0 / dimension``
    per axis), so the centre of mass has total variance ``sigma0 / N``.
``radial``
    density proportional to ``exp(-a r**2) / r`` in three dimensions, i.e.
    radial law ``r exp(-a r**2)``, with ``a = a0 * N**interaction_exponent``.
    Sampled exactly through ``u = r**2 ~ Exponential(a)`` plus a uniform
    direction; the same radial law is used in one and two dimensions.

All random streams derive from ``SeedSequence([seed, tag, chunk])``, so
results are bit-identical for a fixed seed whatever the worker count.
"""

from __future__ import annotations

import concurrent.futures as cf
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import EvaluationFailure, InvalidArgs, InvalidSpec, StepUnstable, UnboundedDistribution

_CHUNK_VALUES = 1 << 22


@dataclass(frozen=True)
class EnsembleSpec:
    N: int
    dimension: int = 1
    distribution: str = "gaussian"
    sigma0: float = 1.0
    a0: float = 1.0
    C: float = 1.0
    interaction_exponent: float = 0.0
    seed: int = 0
    truncate: float | None = None  # in units of the single-axis scale

    def __post_init__(self):
        if int(self.N) < 1:
            raise InvalidSpec(f"N must be >= 1, got {self.N}")
        if self.dimension not in (1, 2, 3):
            raise InvalidSpec(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.distribution == "gaussian":
            if not self.sigma0 >= 0:
                raise InvalidSpec("sigma0 must be non-negative")
        elif self.distribution == "radial":
            if not (self.a0 > 0 and self.C > 0):
                raise InvalidSpec("radial distribution needs a0 > 0 and C > 0")
        else:
            raise InvalidSpec(f"unknown distribution {self.distribution!r}")
        if self.interaction_exponent < 0:
            raise InvalidSpec("interaction_exponent must be >= 0")
        if self.truncate is not None and not self.truncate > 0:
            raise InvalidSpec("truncate must be positive")

    @property
    def a(self) -> float:
        return self.a0 * float(self.N) ** self.interaction_exponent

    def particle_variance(self) -> float:
        """Total (trace) variance of one particle's position."""
        if self.distribution == "gaussian":
            return self.sigma0
        return 1.0 / self.a

    def cm_variance(self) -> float:
        return self.particle_variance() / self.N


def sample_positions(spec: EnsembleSpec, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``(samples, N, dimension)`` independent particle positions."""
    shape = (samples, spec.N, spec.dimension)
    if spec.distribution == "gaussian":
        scale = math.sqrt(spec.sigma0 / spec.dimension)
        x = rng.standard_normal(shape)
        if spec.truncate is not None:
            bad = np.abs(x) > spec.truncate
            while bad.any():
                x[bad] = rng.standard_normal(int(bad.sum()))
                bad = np.abs(x) > spec.truncate
        return scale * x
    a = spec.a
    uniform = rng.random(shape[:2])
    if spec.truncate is None:
        u = -np.log1p(-uniform) / a
    else:
        # truncated exponential by inverse CDF, cutoff r <= truncate / sqrt(a)
        u_max = spec.truncate**2 / a
        u = -np.log1p(-uniform * -np.expm1(-a * u_max)) / a
    r = np.sqrt(u)
    if spec.dimension == 1:
        direction = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    else:
        direction = rng.standard_normal(shape)
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    return r[..., None] * direction


def _chunks(total: int, per_sample_values: int) -> list[int]:
    size = max(1, _CHUNK_VALUES // max(1, per_sample_values))
    out = [size] * (total // size)
    if total % size:
        out.append(total % size)
    return out


def _map_chunks(fn, spec: EnsembleSpec, samples: int, tag: int, workers: int):
    sizes = _chunks(samples, spec.N * spec.dimension)
    seqs = [np.random.SeedSequence([int(spec.seed), tag, int(spec.N), c]) for c in range(len(sizes))]
    jobs = list(zip(sizes, seqs))

    def run(job):
        rng = np.random.default_rng(job[1])
        return fn(sample_positions(spec, job[0], rng), rng)

    if workers > 1:
        with cf.ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


@dataclass(frozen=True, eq=False)
class CmStatistics:
    mean: np.ndarray
    variance: float
    samples: int
    stderr: float
    mean_stderr: np.ndarray


def cm_statistics(spec: EnsembleSpec, samples: int, workers: int = 1) -> CmStatistics:
    """Monte Carlo mean and total variance of the centre of mass.

    ``stderr`` is the standard error of the variance estimate, computed from
    the spread of the squared deviations.
    """
    if samples < 100:
        raise InvalidSpec(f"need at least 100 samples, got {samples}")
    parts = _map_chunks(lambda x, rng: x.mean(axis=1), spec, samples, 0, workers)
    cm = np.concatenate(parts, axis=0)
    mean = cm.mean(axis=0)
    q = np.sum((cm - mean) ** 2, axis=1) * samples / (samples - 1)
    variance = float(q.mean())
    stderr = float(q.std(ddof=1) / math.sqrt(samples))
    mean_stderr = cm.std(axis=0, ddof=1) / math.sqrt(samples)
    return CmStatistics(mean, variance, samples, stderr, mean_stderr)


def radial_moment_quadrature(a: float, C: float) -> float:
    """``C * int_0^inf r**2 * exp(-a r**2) / r dr`` by adaptive quadrature."""
    val, _ = integrate.quad(lambda r: C * r * math.exp(-a * r * r), 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def radial_moment(a: float, C: float) -> float:
    """``<r**2> = C / (2 a)`` for the unnormalized weight ``C exp(-a r**2) / r``.

    The closed form is checked against quadrature. With the weight properly
    normalized in three dimensions (``C = a / (2 pi)``) the moment is ``1/a``.
    """
    if not (a > 0 and C > 0):
        raise InvalidArgs(f"need a > 0 and C > 0, got a={a}, C={C}")
    closed = C / (2 * a)
    quad = radial_moment_quadrature(a, C)
    if abs(quad - closed) > 1e-8 * closed:
        raise EvaluationFailure(f"quadrature {quad!r} disagrees with closed form {closed!r}")
    return closed


def scaled_variance(a0: float, C: float, m_exp: float, N: int) -> float:
    """Summed variance ``N * C / (2 a)`` with ``a = a0 * N**m_exp``.

    Decreases with ``N`` exactly when ``m_exp > 1``.
    """
    if not a0 > 0 or N < 1:
        raise InvalidArgs(f"need a0 > 0 and N >= 1, got a0={a0}, N={N}")
    return C / (2 * a0) * float(N) ** (1 - m_exp)


# -- central moments ---------------------------------------------------------


@dataclass(frozen=True)
class MomentRow:
    N: int
    order: int
    estimate: float
    stderr: float


@dataclass(frozen=True)
class MomentTable:
    rows: tuple[MomentRow, ...]
    index_mode: str
    truncate: float | None
    samples: int
    metadata: dict = field(default_factory=dict)

    def series(self, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.order == order]
        return (
            np.array([r.N for r in rows], dtype=float),
            np.array([r.estimate for r in rows]),
            np.array([r.stderr for r in rows]),
        )


def _index_tuples(rng: np.random.Generator, samples: int, N: int, order: int, distinct: bool):
    if not distinct:
        return np.repeat(rng.integers(0, N, size=(samples, 1)), order, axis=1)
    idx = rng.integers(0, N, size=(samples, order))
    while True:
        s = np.sort(idx, axis=1)
        dup = np.any(s[:, 1:] == s[:, :-1], axis=1)
        if not dup.any():
            return idx
        idx[dup] = rng.integers(0, N, size=(int(dup.sum()), order))


def central_moment_decay(
    spec: EnsembleSpec,
    orders,
    N_list,
    samples: int = 20000,
    index_mode: str = "distinct",
    workers: int = 1,
) -> MomentTable:
    """Estimate ``<s_i1 ... s_im>`` for relative coordinates ``s = X - X_cm``.

    Moments use the first Cartesian component. ``index_mode="distinct"``
    averages over random tuples of distinct particles, ``"diagonal"`` uses
    ``<s_i**m>``. Boundedness is required, so ``spec.truncate`` must be set.
    """
    if spec.truncate is None:
        raise UnboundedDistribution("moment decay needs a truncated (bounded) distribution")
    if index_mode not in ("distinct", "diagonal"):
        raise InvalidArgs(f"unknown index_mode {index_mode!r}")
    orders = [int(o) for o in orders]
    if any(o < 2 or o > 6 for o in orders):
        raise InvalidArgs("orders must lie in 2..6")
    distinct = index_mode == "distinct"
    rows = []
    for N in N_list:
        sN = replace(spec, N=int(N))
        if distinct and sN.N < max(orders):
            raise InvalidArgs(f"N = {N} too small for distinct tuples of order {max(orders)}")

        def moments(x, rng, _sN=sN):
            s = x[:, :, 0] - x[:, :, 0].mean(axis=1, keepdims=True)
            out = []
            for o in orders:
                idx = _index_tuples(rng, s.shape[0], _sN.N, o, distinct)
                out.append(np.prod(np.take_along_axis(s, idx, axis=1), axis=1))
            return np.stack(out, axis=1)

        vals = np.concatenate(_map_chunks(moments, sN, samples, 1, workers), axis=0)
        for j, o in enumerate(orders):
            v = vals[:, j]
            rows.append(MomentRow(sN.N, o, float(v.mean()), float(v.std(ddof=1) / math.sqrt(samples))))
    return MomentTable(tuple(rows), index_mode, spec.truncate, samples, {"axis": 0})


@dataclass(frozen=True)
class PowerLawFit:
    slope: float
    slope_stderr: float
    intercept: float

    def decreasing(self, z: float = 1.96) -> bool:
        return self.slope + z * self.slope_stderr < 0


def fit_power_law(N, values, stderr=None) -> PowerLawFit:
    """Weighted least squares of ``log|values|`` against ``log N``."""
    x = np.log(np.asarray(N, dtype=float))
    v = np.abs(np.asarray(values, dtype=float))
    y = np.log(v)
    if stderr is None:
        w = np.ones_like(y)
    else:
        sig = np.asarray(stderr, dtype=float) / v
        w = 1.0 / np.maximum(sig, 1e-300) ** 2
    X = np.stack([np.ones_like(x), x], axis=1)
    A = X.T @ (w[:, None] * X)
    beta = np.linalg.solve(A, X.T @ (w * y))
    if stderr is None:
        resid = y - X @ beta
        dof = max(1, len(x) - 2)
        cov = np.linalg.inv(A) * float(resid @ resid) / dof
    else:
        cov = np.linalg.inv(A)
    return PowerLawFit(float(beta[1]), float(math.sqrt(max(cov[1, 1], 0.0))), float(beta[0]))


# -- Ehrenfest ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """``harmonic``: k|R|^2/2; ``quartic``: k|R|^2/2 + lam|R|^4/4;
    ``tabulated``: 1-D values on a grid, gradient by finite differences."""

    kind: str = "harmonic"
    k: float = 1.0
    lam: float = 0.0
    grid: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("harmonic", "quartic", "tabulated"):
            raise InvalidSpec(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and self.lam != 0.0:
            raise InvalidSpec("harmonic potential takes no quartic coefficient")
        if self.kind == "tabulated":
            if self.grid is None or self.values is None or len(self.grid) != len(self.values):
                raise InvalidSpec("tabulated potential needs grid and values of equal length")
            g = np.asarray(self.grid, dtype=float)
            if np.any(np.diff(g) <= 0):
                raise InvalidSpec("grid must be strictly increasing")

    @property
    def analytic_gradient(self) -> bool:
        return self.kind != "tabulated"

    def energy(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(y)
        if self.kind == "tabulated":
            return np.interp(y[:, 0], self.grid, self.values)
        r2 = np.sum(y * y, axis=1)
        return 0.5 * self.k * r2 + 0.25 * self.lam * r2 * r2

    def force(self, y: np.ndarray) -> np.ndarray:
        y = np.ascontiguousarray(np.atleast_2d(y), dtype=float)
        if self.kind == "tabulated":
            dv = np.gradient(np.asarray(self.values, float), np.asarray(self.grid, float))
            return -np.interp(y, self.grid, dv)
        return _kernels.polynomial_force(y, self.k, self.lam)


@dataclass(frozen=True, eq=False)
class EhrenfestReport:
    N: int
    max_deviation: float
    energy_drift: float
    jitter_variance: float
    times: np.ndarray
    mean_trajectory: np.ndarray
    reference_trajectory: np.ndarray
    metadata: dict = field(default_factory=dict)


def _verlet(potential: PotentialSpec, x, v, f, jitter, dt, mass):
    if potential.kind != "tabulated":
        return _kernels.verlet_ensemble(x, v, f, jitter, dt, potential.k, potential.lam, mass)
    half = 0.5 * dt / mass
    means = np.empty((jitter.shape[0], x.shape[1]))
    for n in range(jitter.shape[0]):
        v += half * f
        x += dt * v
        f[...] = potential.force(x + jitter[n])
        v += half * f
        means[n] = x.mean(axis=0)
    return means


def newton_reference(potential: PotentialSpec, R0, M_total: float, t_end: float, dt: float, block: int = 100):
    """Velocity-Verlet solution of ``M R'' = -grad V(R)`` from rest.

    Returns ``(trajectory, relative_energy_drift)``; the energy is sampled
    every ``block`` steps.
    """
    steps = int(round(t_end / dt))
    x = np.array(R0, dtype=float).reshape(1, -1)
    v = np.zeros_like(x)
    f = potential.force(x)
    e0 = float(potential.energy(x)[0])
    zero = np.zeros((block, 1, x.shape[1]))
    traj = np.empty((steps, x.shape[1]))
    worst = 0.0
    done = 0
    while done < steps:
        nb = min(block, steps - done)
        traj[done : done + nb] = _verlet(potential, x, v, f, zero[:nb], dt, M_total)
        done += nb
        e = 0.5 * M_total * float(np.sum(v * v)) + float(potential.energy(x)[0])
        worst = max(worst, abs(e - e0))
    drift = worst / abs(e0) if e0 != 0 else worst
    return traj, drift


def ehrenfest_compare(
    potential: PotentialSpec,
    spec: EnsembleSpec,
    M_total: float = 1.0,
    t_end: float = 10.0,
    dt: float = 1e-3,
    samples: int = 2000,
    R0=None,
    block: int = 500,
) -> EhrenfestReport:
    """Ensemble-mean centre-of-mass motion against Newton's law.

    Each ensemble member follows velocity Verlet under the force evaluated
    at its position plus a fresh zero-mean jitter whose total variance is the
    centre-of-mass variance of ``spec`` (``sigma0 / N`` for gaussians).
    Jitter is drawn in antithetic pairs so its ensemble mean vanishes
    exactly; a linear force then reproduces the reference to round-off.
    """
    if not dt > 0 or not t_end > 0:
        raise InvalidArgs("dt and t_end must be positive")
    if samples < 2 or samples % 2:
        raise InvalidArgs("samples must be an even number >= 2")
    d = spec.dimension
    if R0 is None:
        R0 = np.eye(d)[0]
    R0 = np.asarray(R0, dtype=float).reshape(d)
    if potential.kind == "tabulated" and d != 1:
        raise InvalidSpec("tabulated potentials are one-dimensional")

    ref, drift = newton_reference(potential, R0, M_total, t_end, dt)
    if drift > 0.01:
        raise StepUnstable(f"reference energy drift {drift:.3%} exceeds 1% at dt = {dt}")

    steps = ref.shape[0]
    var = spec.cm_variance()
    scale = math.sqrt(var / d)
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 2, int(spec.N)]))
    half = samples // 2

    def draw(nsteps):
        z = scale * rng.standard_normal((nsteps, half, d))
        return np.ascontiguousarray(np.concatenate([z, -z], axis=1))

    x = np.tile(R0, (samples, 1))
    v = np.zeros_like(x)
    f = potential.force(x + draw(1)[0])
    means = np.empty((steps, d))
    done = 0
    while done < steps:
        nb = min(block, steps - done)
        means[done : done + nb] = _verlet(potential, x, v, f, draw(nb), dt, M_total)
        done += nb
    dev = float(np.max(np.linalg.norm(means - ref, axis=1)))
    times = dt * np.arange(1, steps + 1)
    meta = {"dt": dt, "t_end": t_end, "samples": samples, "seed": spec.seed, "backend": _kernels.BACKEND}
    return EhrenfestReport(spec.N, dev, drift, var, times, means, ref, meta)


@dataclass(frozen=True)
class EhrenfestScaling:
    N: tuple[int, ...]
    deviations: tuple[float, ...]
    fit: PowerLawFit


def ehrenfest_scaling(potential: PotentialSpec, spec: EnsembleSpec, N_list, **kwargs) -> EhrenfestScaling:
    devs = []
    for N in N_list:
        devs.append(ehrenfest_compare(potential, replace(spec, N=int(N)), **kwargs).max_deviation)
    Ns = tuple(int(n) for n in N_list)
    return EhrenfestScaling(Ns, tuple(devs), fit_power_law(Ns, devs))
