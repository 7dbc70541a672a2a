"""Finite configuration spaces and stochastic transition laws.

Convention: matrices are *column*-stochastic. ``gamma[i, j]`` is the
probability of finding configuration ``i`` at time ``t`` given configuration
``j`` at time 0, so every column sums to one and a probability vector
evolves as ``p(t) = gamma(t) @ p(0)``. Much of the Markov-chain literature
uses the transposed (row-stochastic) convention.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ColumnSumViolation,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidArgs,
    NegativeEntry,
    TimeNotInFamily,
    ValidationError,
)

EPS_STOCH = 1e-9
EPS_DIV = 1e-7
KAPPA_MAX = 1e8


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConfigurationSpace:
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.size) < 1:
            raise ValidationError(f"configuration space needs size >= 1, got {self.size}")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
            if len(self.labels) != self.size:
                raise ValidationError(
                    f"{len(self.labels)} labels given for {self.size} configurations"
                )

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i)


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """A validated column-stochastic matrix ``gamma(t)``.

    Build instances through :func:`validate_stochastic`; the constructor
    assumes its input has already been checked.
    """

    entries: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(np.asarray(self.entries, dtype=float)))
        object.__setattr__(self, "time", float(self.time))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def is_doubly_stochastic(self, tol: float = EPS_STOCH) -> bool:
        return bool(np.all(np.abs(self.entries.sum(axis=1) - 1.0) <= tol))


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(np.asarray(self.entries, dtype=float)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True)
class TimeSet:
    times: tuple[float, ...]

    def __post_init__(self):
        ts = tuple(float(t) for t in self.times)
        if not ts or 0.0 not in ts:
            raise ValidationError("time set must contain t = 0")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValidationError("time set must be strictly increasing")
        object.__setattr__(self, "times", ts)

    def __contains__(self, t) -> bool:
        return self.find(t) is not None

    def find(self, t: float, rtol: float = 1e-12) -> float | None:
        for s in self.times:
            if abs(s - t) <= rtol * max(1.0, abs(t)):
                return s
        return None


@dataclass(frozen=True)
class DivisibilityVerdict:
    status: str  # "divisible-at" | "indivisible-witness" | "inconclusive"
    witness: tuple[float, float, float] | None = None
    factor: np.ndarray | None = field(default=None, compare=False, repr=False)
    condition_number: float = float("nan")

    def __post_init__(self):
        if self.status not in ("divisible-at", "indivisible-witness", "inconclusive"):
            raise ValidationError(f"unknown verdict status {self.status!r}")
        if self.status == "indivisible-witness" and (
            self.witness is None or not self.witness[2] > EPS_DIV
        ):
            raise ValidationError("an indivisibility witness needs a violation above eps_div")


def validate_stochastic(raw, time: float = 0.0, tol: float = EPS_STOCH) -> StochasticMatrix:
    """Check that ``raw`` is square and column-stochastic within ``tol``.

    Entries within ``tol`` of the boundary of [0, 1] are clamped onto it.

    Raises
    ------
    NegativeEntry
        If an entry is below ``-tol``.
    ColumnSumViolation
        If a column sum differs from one by more than ``tol``.
    """
    a = np.asarray(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    if a.min() < -tol:
        idx = np.unravel_index(np.argmin(a), a.shape)
        raise NegativeEntry(tuple(int(i) for i in idx), float(a[idx]))
    if a.max() > 1.0 + tol:
        idx = np.unravel_index(np.argmax(a), a.shape)
        raise ValidationError(f"entry {float(a[idx])!r} at index {idx} exceeds 1")
    sums = a.sum(axis=0)
    bad = np.abs(sums - 1.0) > tol
    if bad.any():
        j = int(np.argmax(bad))
        raise ColumnSumViolation(j, float(sums[j]))
    return StochasticMatrix(np.clip(a, 0.0, 1.0), time)


def probability_vector(values, tol: float = EPS_STOCH) -> ProbabilityVector:
    p = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise DimensionMismatch(f"expected a non-empty vector, got shape {p.shape}")
    if p.min() < -tol:
        i = int(np.argmin(p))
        raise NegativeEntry((i,), float(p[i]))
    if abs(p.sum() - 1.0) > tol * max(1, p.size):
        raise ValidationError(f"probabilities sum to {p.sum()!r}, expected 1")
    return ProbabilityVector(np.clip(p, 0.0, None))


def _entries(x) -> np.ndarray:
    return x.entries if isinstance(x, (StochasticMatrix, ProbabilityVector)) else np.asarray(x, dtype=float)


def marginalize(gamma: StochasticMatrix, p0) -> ProbabilityVector:
    """Propagate an initial law: ``p(t) = gamma @ p0``."""
    g = _entries(gamma)
    p = _entries(p0)
    if g.shape[1] != p.shape[0]:
        raise DimensionMismatch(f"matrix of dim {g.shape[1]} applied to vector of dim {p.shape[0]}")
    return probability_vector(g @ p, tol=EPS_STOCH * g.shape[0])


def compose(later: StochasticMatrix, earlier: StochasticMatrix) -> StochasticMatrix:
    """Chain two transition laws, ``later @ earlier``.

    This is the composition a divisible process would satisfy. The time stamp
    of the result is the sum of the two.
    """
    a, b = _entries(later), _entries(earlier)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compose shapes {a.shape} and {b.shape}")
    t = getattr(later, "time", 0.0) + getattr(earlier, "time", 0.0)
    return validate_stochastic(a @ b, time=t)


def _lookup(family: Mapping, t: float):
    if t in family:
        return family[t]
    for s, g in family.items():
        if abs(s - t) <= 1e-12 * max(1.0, abs(t)):
            return g
    raise TimeNotInFamily(f"no transition matrix recorded at t = {t!r}")


def stochastic_violation(r: np.ndarray) -> float:
    """Largest amount by which ``r`` fails to be column-stochastic."""
    r = np.asarray(r, dtype=float)
    return float(
        max(
            0.0,
            -r.min(),
            r.max() - 1.0,
            np.abs(r.sum(axis=0) - 1.0).max(),
        )
    )


def divisibility_witness(
    family: Mapping[float, StochasticMatrix],
    t1: float,
    t2: float,
    eps_div: float = EPS_DIV,
    kappa_max: float = KAPPA_MAX,
) -> DivisibilityVerdict:
    """Test whether ``gamma(t2)`` factors through ``gamma(t1)``.

    Only the right-factor criterion is used: with
    ``R = gamma(t2) @ inv(gamma(t1))`` the process is divisible at ``t1`` iff
    ``R`` is stochastic. An ill-conditioned ``gamma(t1)`` gives an
    inconclusive verdict rather than a spurious witness.
    """
    if not 0.0 < t1 < t2:
        raise InvalidArgs(f"need 0 < t1 < t2, got t1={t1!r}, t2={t2!r}")
    g1 = _entries(_lookup(family, t1))
    g2 = _entries(_lookup(family, t2))
    if g1.shape != g2.shape:
        raise DimensionMismatch("family members have different dimensions")
    kappa = float(np.linalg.cond(g1))
    if not np.isfinite(kappa) or kappa > kappa_max:
        return DivisibilityVerdict("inconclusive", None, None, kappa)
    r = g2 @ np.linalg.inv(g1)
    violation = stochastic_violation(r)
    if violation > eps_div:
        return DivisibilityVerdict("indivisible-witness", (t1, t2, violation), r, kappa)
    return DivisibilityVerdict("divisible-at", (t1, t2, violation), r, kappa)


def sample_configuration(gamma: StochasticMatrix, j0: int, rng: np.random.Generator, size=None):
    """Draw the configuration at time ``t`` given configuration ``j0`` at time 0.

    Only conditional draws from the initial time are offered: an indivisible
    process assigns no joint law to intermediate times.
    """
    g = _entries(gamma)
    if not 0 <= j0 < g.shape[1]:
        raise IndexOutOfRange(f"configuration {j0} outside 0..{g.shape[1] - 1}")
    col = g[:, j0]
    col = col / col.sum()
    out = rng.choice(g.shape[0], size=size, p=col)
    return int(out) if size is None else out


def rabi_family(times: Sequence[float]) -> dict[float, StochasticMatrix]:
    """``[[cos^2 t, sin^2 t], [sin^2 t, cos^2 t]]`` at each requested time."""
    fam = {}
    for t in times:
        c2, s2 = np.cos(t) ** 2, np.sin(t) ** 2
        fam[float(t)] = validate_stochastic([[c2, s2], [s2, c2]], time=t)
    return fam
