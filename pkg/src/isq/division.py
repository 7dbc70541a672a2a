"""System plus environment after a perfect-correlation interaction.

At the end of the interaction (time ``t0``) the joint amplitude is
``<i, e|Psi> = psi_i * delta(e, emap[i])``; afterwards system and
environment evolve independently. Marginalizing over the environment gives
the exact system law. When ``emap`` is injective the environment overlaps
collapse to a Kronecker delta and the law restarts classically from ``t0``
(a division event). Non-injective maps leave interference terms behind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidArgs,
    TimeBeforeInteraction,
    ValidationError,
    ZeroProbabilityOutcome,
)
from .quantum import (
    HermitianOperator,
    Propagator,
    StateVector,
    as_propagator,
    born_probabilities,
    evolve_unitary,
    schur_mod_square,
)
from .stochastic import EPS_STOCH, ProbabilityVector, marginalize, probability_vector

MAX_JOINT_DIM = 2**14


@dataclass(frozen=True, eq=False)
class CorrelationMap:
    system_dim: int
    env_dim: int
    map: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.map, dtype=np.int64)
        if e.shape != (self.system_dim,):
            raise DimensionMismatch(f"map has shape {e.shape}, expected ({self.system_dim},)")
        if self.env_dim < 1 or e.min(initial=0) < 0 or e.max(initial=0) >= self.env_dim:
            raise IndexOutOfRange(f"map values must lie in 0..{self.env_dim - 1}")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "map", e)

    @property
    def injective(self) -> bool:
        return len(np.unique(self.map)) == self.system_dim


@dataclass(frozen=True, eq=False)
class JointSystem:
    """Independent post-interaction dynamics of system and environment.

    ``sys_unitary`` and ``env_unitary`` are either fixed propagators for the
    interval ``t0 -> t`` or Hermitian generators, in which case
    ``exp(-i H (t - t0))`` is used.
    """

    sys_unitary: Propagator | HermitianOperator
    env_unitary: Propagator | HermitianOperator
    correlation: CorrelationMap
    initial_sys_state: StateVector
    t0: float = 0.0

    def __post_init__(self):
        if not isinstance(self.initial_sys_state, StateVector):
            object.__setattr__(self, "initial_sys_state", StateVector(self.initial_sys_state))
        for name in ("sys_unitary", "env_unitary"):
            op = getattr(self, name)
            if not isinstance(op, (Propagator, HermitianOperator)):
                object.__setattr__(self, name, as_propagator(op))
        n, m = self.correlation.system_dim, self.correlation.env_dim
        if self.sys_unitary.dim != n or self.initial_sys_state.dim != n:
            raise DimensionMismatch("system propagator, state and map disagree on n")
        if self.env_unitary.dim != m:
            raise DimensionMismatch("environment propagator and map disagree on m")

    def _propagators(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if t < self.t0:
            raise TimeBeforeInteraction(f"t = {t!r} precedes the interaction end t0 = {self.t0!r}")
        out = []
        for op in (self.sys_unitary, self.env_unitary):
            if isinstance(op, HermitianOperator):
                out.append(evolve_unitary(op, t - self.t0).entries)
            else:
                out.append(op.entries)
        return out[0], out[1]


@dataclass(frozen=True, eq=False)
class DivisionReport:
    exact_marginal: ProbabilityVector
    division_formula: ProbabilityVector
    max_error: float
    injective: bool


def joint_amplitude(js: JointSystem, t: float) -> np.ndarray:
    """``<i, e|Psi(t)>`` as an ``(n, m)`` array."""
    us, ue = js._propagators(t)
    n, m = js.correlation.system_dim, js.correlation.env_dim
    if n * m > MAX_JOINT_DIM:
        raise ValidationError(f"joint dimension {n * m} exceeds {MAX_JOINT_DIM}")
    psi = js.initial_sys_state.amplitudes
    # column i' of env_cols is U^E |e'(i')>
    env_cols = ue[:, js.correlation.map]
    return (us * psi[None, :]) @ env_cols.T


def exact_marginal(js: JointSystem, t: float) -> ProbabilityVector:
    """System law from the double sum over branches ``i'_1, i'_2``.

    The environment enters only through the overlap
    ``sum_e conj(<e|U^E|e'(a)>) <e|U^E|e'(b)>``, which is evaluated
    explicitly rather than assumed to be a delta.
    """
    us, ue = js._propagators(t)
    psi = js.initial_sys_state.amplitudes
    amp = np.ascontiguousarray(us * psi[None, :])
    env = np.ascontiguousarray(ue[:, js.correlation.map])
    p = _kernels.env_marginal(amp, env)
    return probability_vector(p, tol=1e-9)


def division_formula(js: JointSystem, t: float) -> ProbabilityVector:
    """Classical restart from ``t0``: ``|U^S|**2`` applied to the Born law at ``t0``."""
    us, _ = js._propagators(t)
    return marginalize(schur_mod_square(us), born_probabilities(js.initial_sys_state))


def division_report(js: JointSystem, t: float) -> DivisionReport:
    exact = exact_marginal(js, t)
    div = division_formula(js, t)
    err = float(np.abs(exact.entries - div.entries).max())
    return DivisionReport(exact, div, err, js.correlation.injective)


# -- collision statistics ------------------------------------------------------


def collision_probability_exact(n: int, m: int) -> float:
    """Probability that ``n`` uniform draws from ``m`` values are all distinct.

    Evaluated as ``prod_{k<n} (1 - k/m)``; no factorials are formed.
    """
    if n < 1 or m < 1:
        raise InvalidArgs(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if n > m:
        return 0.0
    p = 1.0
    for k in range(n):
        p *= 1.0 - k / m
    return p


def collision_probability_approx(n: int, m: int) -> float:
    """``exp(-n (n - 1) / (2 m))``; only meaningful for ``m >> n``."""
    if n < 1 or m < 1:
        raise InvalidArgs(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    return math.exp(-n * (n - 1) / (2 * m))


def random_correlation_maps(n: int, m: int, draws: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, m, size=(draws, n), dtype=np.int64)


def injectivity_frequency(n: int, m: int, draws: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo fraction of injective random maps and its standard error."""
    maps = random_correlation_maps(n, m, draws, rng)
    hits = _kernels.count_injective(np.ascontiguousarray(maps), m)
    f = hits / draws
    return f, math.sqrt(max(f * (1 - f), 1e-300) / draws)


# -- collapse ------------------------------------------------------------------------


def joint_distribution(p_sys, cmap: CorrelationMap) -> np.ndarray:
    """Perfectly correlated joint law ``p(i, e) = p(i) delta(e, emap[i])``."""
    p = np.asarray(getattr(p_sys, "entries", p_sys), dtype=float)
    out = np.zeros((cmap.system_dim, cmap.env_dim))
    out[np.arange(cmap.system_dim), cmap.map] = p
    return out


def collapse_condition(p_joint, observed_e: int) -> ProbabilityVector:
    """Condition a joint law over ``(i, e)`` on the environment outcome."""
    pj = np.asarray(p_joint, dtype=float)
    if pj.ndim != 2:
        raise DimensionMismatch("joint law must be a 2-D array indexed (i, e)")
    if pj.min() < -EPS_STOCH or abs(pj.sum() - 1.0) > EPS_STOCH * pj.size:
        raise ValidationError("joint law is not a probability distribution")
    if not 0 <= observed_e < pj.shape[1]:
        raise IndexOutOfRange(f"environment outcome {observed_e} out of range")
    col = np.clip(pj[:, observed_e], 0.0, None)
    z = col.sum()
    if z <= 0:
        raise ZeroProbabilityOutcome(f"outcome e = {observed_e} has probability zero")
    return probability_vector(col / z)
