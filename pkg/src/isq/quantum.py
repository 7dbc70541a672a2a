"""Hilbert-space side of the correspondence (units with hbar = 1).

A unitary ``U`` induces the transition law ``gamma = |U|**2`` (entrywise).
Propagators are built from Hermitian generators by spectral decomposition,
which keeps them unitary to round-off.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EigenDecompositionFailure,
    EvaluationFailure,
    NotHermitian,
    NotNormalized,
    NotUnitary,
    StepTooSmall,
    ValidationError,
)
from .stochastic import ProbabilityVector, StochasticMatrix, probability_vector, validate_stochastic

EPS_HERM = 1e-9
EPS_UNIT = 1e-9
EPS_NORM = 1e-9
POLAR_LIMIT = 1e-6

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _square(a: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    entries: np.ndarray

    def __post_init__(self):
        h = _square(np.asarray(self.entries, dtype=complex))
        dev = float(np.abs(h - h.conj().T).max())
        if dev > EPS_HERM * max(1.0, float(np.abs(h).max())):
            raise NotHermitian(f"operator deviates from its adjoint by {dev:.3e}")
        object.__setattr__(self, "entries", _frozen((h + h.conj().T) / 2))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True, eq=False)
class Propagator:
    """Unitary ``U(t)``; ``generator`` is set when built from a Hamiltonian."""

    entries: np.ndarray
    time: float = 0.0
    generator: HermitianOperator | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(_square(np.asarray(self.entries, dtype=complex))))
        object.__setattr__(self, "time", float(self.time))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __matmul__(self, other: Propagator) -> Propagator:
        return Propagator(self.entries @ np.asarray(other), self.time + getattr(other, "time", 0.0))


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex)
        if psi.ndim != 1 or psi.size < 1:
            raise DimensionMismatch(f"expected a non-empty vector, got shape {psi.shape}")
        norm = float(np.vdot(psi, psi).real)
        if abs(norm - 1.0) > EPS_NORM:
            raise NotNormalized(f"state has squared norm {norm!r}")
        object.__setattr__(self, "amplitudes", _frozen(psi))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    entries: np.ndarray

    def __post_init__(self):
        rho = _square(np.asarray(self.entries, dtype=complex))
        if float(np.abs(rho - rho.conj().T).max()) > EPS_HERM:
            raise NotHermitian("density operator is not self-adjoint")
        rho = (rho + rho.conj().T) / 2
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > EPS_NORM:
            raise NotNormalized(f"density operator has trace {tr!r}")
        if float(np.linalg.eigvalsh(rho).min()) < -EPS_NORM:
            raise ValidationError("density operator has a negative eigenvalue")
        object.__setattr__(self, "entries", _frozen(rho))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def probs(self) -> ProbabilityVector:
        """Configuration probabilities ``tr(P_i rho)``, i.e. the diagonal."""
        return probability_vector(np.diagonal(self.entries).real, tol=EPS_NORM)

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)


def unitarity_defect(u) -> float:
    u = np.asarray(u)
    return float(np.abs(u @ u.conj().T - np.eye(u.shape[0])).max())


def polar_unitary(u) -> np.ndarray:
    """Closest unitary to ``u`` in Frobenius norm."""
    x, _, yh = np.linalg.svd(np.asarray(u, dtype=complex))
    return x @ yh


def as_propagator(u, time: float = 0.0) -> Propagator:
    """Wrap a matrix as a :class:`Propagator`.

    A defect in (``EPS_UNIT``, ``POLAR_LIMIT``] is repaired by polar
    re-orthonormalization; anything larger raises :class:`NotUnitary`.
    """
    if isinstance(u, Propagator):
        return u
    u = _square(np.asarray(u, dtype=complex))
    dev = unitarity_defect(u)
    if dev > POLAR_LIMIT:
        raise NotUnitary(f"U U^dagger deviates from identity by {dev:.3e}")
    if dev > EPS_UNIT:
        u = polar_unitary(u)
    return Propagator(u, time)


def _as_hermitian(h) -> HermitianOperator:
    return h if isinstance(h, HermitianOperator) else HermitianOperator(h)


def evolve_unitary(h, t: float) -> Propagator:
    """``exp(-i H t)`` by spectral decomposition of ``H``."""
    h = _as_hermitian(h)
    a = h.entries
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionFailure(str(exc)) from exc
    scale = max(1.0, float(np.abs(a).max()))
    residual = float(np.abs(a @ v - v * w).max()) / scale
    if not np.isfinite(residual) or residual > 1e-8:
        raise EigenDecompositionFailure(f"eigendecomposition residual {residual:.3e}")
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    prop = as_propagator(u, t)
    return Propagator(prop.entries, t, h)


def schur_mod_square(u) -> StochasticMatrix:
    """Entrywise ``|U_ij|**2``; doubly stochastic for unitary ``U``."""
    prop = as_propagator(u)
    return validate_stochastic(np.abs(prop.entries) ** 2, time=prop.time)


def born_probabilities(psi) -> ProbabilityVector:
    if not isinstance(psi, StateVector):
        psi = StateVector(psi)
    return probability_vector(np.abs(psi.amplitudes) ** 2, tol=EPS_NORM)


def density_evolution(p0, u) -> DensityOperator:
    """``rho(t) = U diag(p0) U^dagger``."""
    p = np.asarray(p0.entries if isinstance(p0, ProbabilityVector) else p0, dtype=float)
    prop = as_propagator(u)
    if p.shape != (prop.dim,):
        raise DimensionMismatch(f"probability vector of shape {p.shape} for dim {prop.dim}")
    m = prop.entries
    return DensityOperator((m * p) @ m.conj().T)


@dataclass(frozen=True, eq=False)
class RecoveredHamiltonian:
    operator: HermitianOperator
    hermiticity_residual: float
    step: float


def hamiltonian_from_propagator(
    family: Callable[[float], object], t: float, h: float = 1e-4
) -> RecoveredHamiltonian:
    """Recover ``H = i (dU/dt) U^dagger`` by a central difference.

    Truncation error is O(h**2 * ||H||**3) while round-off grows like
    eps / h, so h ~ 1e-4 is a good default when ||H|| ~ 1. The raw estimate
    is not exactly Hermitian; its anti-Hermitian part is reported as the
    residual and the Hermitian part is returned.
    """
    if not h > 0:
        raise StepTooSmall(f"step must be positive, got {h!r}")
    if h < 1e-12:
        raise StepTooSmall(f"step {h!r} is below 1e-12")
    try:
        up = np.asarray(family(t + h), dtype=complex)
        um = np.asarray(family(t - h), dtype=complex)
        u0 = np.asarray(family(t), dtype=complex)
    except Exception as exc:
        raise EvaluationFailure(f"propagator family failed near t = {t!r}: {exc}") from exc
    raw = 1j * (up - um) / (2 * h) @ u0.conj().T
    residual = float(np.abs(raw - raw.conj().T).max()) / 2
    herm = (raw + raw.conj().T) / 2
    return RecoveredHamiltonian(HermitianOperator(herm), residual, h)


def interference_decompose(psi1, psi2):
    """Split ``|psi1 + psi2|**2`` into the two direct terms and the cross term.

    Returns ``(direct1, direct2, cross)`` componentwise, with
    ``cross = 2 Re(conj(psi1) psi2)``. Inputs are branch amplitudes and need
    not be normalized.
    """
    a = np.atleast_1d(np.asarray(psi1, dtype=complex))
    b = np.atleast_1d(np.asarray(psi2, dtype=complex))
    if a.shape != b.shape:
        raise DimensionMismatch(f"branch shapes differ: {a.shape} vs {b.shape}")
    return np.abs(a) ** 2, np.abs(b) ** 2, 2 * (a.conj() * b).real


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianOperator:
    """GUE-like random Hermitian matrix with entries of order ``scale``."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator(scale * (z + z.conj().T) / (2 * np.sqrt(2)))


def random_unitary(dim: int, rng: np.random.Generator) -> Propagator:
    """Unitary from a random Hermitian generator at a random time in [0, 2pi)."""
    return evolve_unitary(random_hermitian(dim, rng), rng.uniform(0, 2 * np.pi))
