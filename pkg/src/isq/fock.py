"""Bosonic Fock space in a box and the Dyson series.

Modes are the box momenta ``p_n = n pi / L`` for ``n = 1..n_max``; states are
occupation-number tuples with at most ``max_particles`` quanta. The
time-ordered exponential is expanded as

    U(t, t0) = 1 + sum_k I_k(t),   I_k(s) = -i int_{t0}^{s} H(s') I_{k-1}(s') ds'

which is the k-fold integral over the ordered simplex. The nested integrals
are evaluated on Gauss-Legendre nodes with the exact polynomial
antiderivative matrix, so constant generators are integrated exactly.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .errors import BasisTooLarge, IndexOutOfRange, InvalidArgs, NotHermitian, OrderUnsupported, QuadratureUnderflow
from .quantum import EPS_HERM, unitarity_defect

MAX_STATES = 4096
MAX_ORDER = 4


@dataclass(frozen=True)
class FockBasis:
    L: float
    n_max: int
    max_particles: int
    modes: tuple[float, ...]
    states: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, occupation) -> int:
        occ = tuple(int(x) for x in occupation)
        try:
            return self._lookup()[occ]
        except KeyError:
            raise IndexOutOfRange(f"occupation {occ} not in basis") from None

    def _lookup(self) -> dict:
        return _state_index(self.states)

    def occupation_from_modes(self, mode_numbers) -> tuple[int, ...]:
        """Occupation tuple for a multiset of 1-based mode numbers."""
        occ = [0] * self.n_max
        for n in mode_numbers:
            if not 1 <= int(n) <= self.n_max:
                raise IndexOutOfRange(f"mode {n} outside 1..{self.n_max}")
            occ[int(n) - 1] += 1
        return tuple(occ)

    def parse_state(self, text: str) -> int:
        """``"vacuum"`` or comma-separated mode numbers such as ``"1,1"``."""
        text = text.strip()
        if text.lower() in ("vacuum", "0", ""):
            return 0
        return self.index(self.occupation_from_modes(int(t) for t in text.split(",")))

    def energies(self, mass: float = 0.0) -> np.ndarray:
        """Free energies ``sum_n occ_n * sqrt(p_n**2 + mass**2)``."""
        omega = np.sqrt(np.asarray(self.modes) ** 2 + mass**2)
        return np.array([float(np.dot(s, omega)) for s in self.states])


@lru_cache(maxsize=32)
def _state_index(states):
    return {s: i for i, s in enumerate(states)}


def build_fock_basis(L: float, n_max: int, max_particles: int) -> FockBasis:
    """Enumerate occupation states: by particle number, then lexicographically.

    For ``n_max = 2, max_particles = 2`` the order is
    ``{}, {1}, {2}, {1,1}, {1,2}, {2,2}``.
    """
    if not L > 0 or n_max < 1 or max_particles < 0:
        raise InvalidArgs(f"need L > 0, n_max >= 1, max_particles >= 0; got {L}, {n_max}, {max_particles}")
    count = math.comb(n_max + max_particles, max_particles)
    if count > MAX_STATES:
        raise BasisTooLarge(f"{count} states exceed the limit of {MAX_STATES}")
    modes = tuple(n * math.pi / L for n in range(1, n_max + 1))
    states = []
    for total in range(max_particles + 1):
        for combo in itertools.combinations_with_replacement(range(n_max), total):
            occ = [0] * n_max
            for m in combo:
                occ[m] += 1
            states.append(tuple(occ))
    return FockBasis(float(L), n_max, max_particles, modes, tuple(states))


@dataclass(frozen=True, eq=False)
class InteractionHamiltonian:
    basis: FockBasis
    matrix_fn: Callable[[float], np.ndarray]

    def __call__(self, t: float) -> np.ndarray:
        h = np.asarray(self.matrix_fn(t), dtype=complex)
        if h.shape != (self.basis.size, self.basis.size):
            raise InvalidArgs(f"interaction matrix has shape {h.shape}")
        if np.abs(h - h.conj().T).max() > EPS_HERM * max(1.0, np.abs(h).max()):
            raise NotHermitian(f"interaction Hamiltonian not Hermitian at t = {t}")
        return h


def constant_interaction(basis: FockBasis, h) -> InteractionHamiltonian:
    h = np.array(h, dtype=complex)
    return InteractionHamiltonian(basis, lambda t: h)


def pair_creation_interaction(basis: FockBasis, g: float = 0.1, mass: float = 0.0) -> InteractionHamiltonian:
    """Toy coupling of the vacuum to each doubly occupied mode, strength ``g``.

    In the interaction picture of the free Hamiltonian
    ``H0 = sum_n occ_n omega_n`` the matrix element picks up the phase
    ``exp(i (E_f - E_i) t)``.
    """
    n = basis.size
    v = np.zeros((n, n), dtype=complex)
    if basis.max_particles >= 2:
        for m in range(basis.n_max):
            occ = [0] * basis.n_max
            occ[m] = 2
            j = basis.index(occ)
            v[j, 0] = v[0, j] = g
    e = basis.energies(mass)
    de = e[:, None] - e[None, :]

    def fn(t):
        return v * np.exp(1j * de * t)

    return InteractionHamiltonian(basis, fn)


@lru_cache(maxsize=16)
def _gauss_legendre(q: int):
    x, w = legendre.leggauss(q)
    # S[i, j] = int_{-1}^{x_i} l_j(s) ds for the Lagrange basis l_j on the nodes
    vander = legendre.legvander(x, q - 1)
    coeffs = np.linalg.inv(vander)  # column j: Legendre coefficients of l_j
    anti = legendre.legint(coeffs, lbnd=-1.0, axis=0)
    S = legendre.legval(x, anti).T
    return x, w, S


@dataclass(frozen=True, eq=False)
class DysonExpansion:
    order: int
    terms: tuple[np.ndarray, ...]
    dim: int
    t0: float
    t: float
    quad_points: int = 0
    partial_sum: np.ndarray = field(init=False)

    def __post_init__(self):
        total = np.eye(self.dim, dtype=complex)
        for term in self.terms:
            total = total + term
        object.__setattr__(self, "partial_sum", total)

    @property
    def all_terms(self) -> tuple[np.ndarray, ...]:
        """Identity followed by the order-1..n terms."""
        return (np.eye(self.dim, dtype=complex),) + self.terms

    @property
    def unitarity_defect(self) -> float:
        return unitarity_defect(self.partial_sum)


def dyson_propagator(H: InteractionHamiltonian, t0: float, t: float, order: int, quad_points: int = 64) -> DysonExpansion:
    """Truncated Dyson series for ``U(t, t0)`` up to ``order``."""
    if not t > t0:
        raise InvalidArgs(f"need t > t0, got t0={t0}, t={t}")
    if not 0 <= order <= MAX_ORDER:
        raise OrderUnsupported(f"order must lie in 0..{MAX_ORDER}, got {order}")
    if quad_points < 8:
        raise InvalidArgs("quad_points must be >= 8")
    half = 0.5 * (t - t0)
    if t0 + half / quad_points**2 == t0:
        raise QuadratureUnderflow(f"interval {t - t0!r} too short to resolve with {quad_points} nodes")
    x, w, S = _gauss_legendre(quad_points)
    nodes = t0 + half * (x + 1.0)
    hs = np.stack([H(s) for s in nodes])  # (q, D, D)
    dim = hs.shape[1]
    current = np.broadcast_to(np.eye(dim, dtype=complex), hs.shape)
    terms = []
    for _ in range(order):
        integrand = np.einsum("qab,qbc->qac", hs, current)
        final = -1j * half * np.einsum("q,qac->ac", w, integrand)
        current = -1j * half * np.einsum("pq,qac->pac", S, integrand)
        terms.append(final)
    return DysonExpansion(order, tuple(terms), dim, float(t0), float(t), quad_points)


def time_ordered_exponential(H: InteractionHamiltonian, t0: float, t: float, steps: int = 2000) -> np.ndarray:
    """Reference propagator from a product of midpoint short-time exponentials."""
    from .quantum import evolve_unitary

    dt = (t - t0) / steps
    u = np.eye(H.basis.size, dtype=complex)
    for n in range(steps):
        u = evolve_unitary(H(t0 + (n + 0.5) * dt), dt).entries @ u
    return u


def s_matrix_probability(u, in_state: int, out_state: int) -> float:
    """``|<f|U|i>|**2``."""
    m = np.asarray(getattr(u, "partial_sum", getattr(u, "entries", u)))
    n = m.shape[0]
    if not (0 <= in_state < n and 0 <= out_state < n):
        raise IndexOutOfRange(f"state indices must lie in 0..{n - 1}")
    return float(abs(m[out_state, in_state]) ** 2)


@dataclass(frozen=True, eq=False)
class InterferenceTerms:
    amplitudes: np.ndarray  # A_0 .. A_n
    direct: np.ndarray  # |A_k|**2
    cross: dict  # (j, k) -> 2 Re(conj(A_j) A_k), j < k
    total: float

    @property
    def cross_sum(self) -> float:
        return float(sum(self.cross.values()))


def term_interference(expansion: DysonExpansion, in_state: int, out_state: int) -> InterferenceTerms:
    """Per-order amplitudes ``A_k = <f|term_k|i>`` and their pairwise interference."""
    n = expansion.partial_sum.shape[0]
    if not (0 <= in_state < n and 0 <= out_state < n):
        raise IndexOutOfRange(f"state indices must lie in 0..{n - 1}")
    amps = np.array([t[out_state, in_state] for t in expansion.all_terms])
    direct = np.abs(amps) ** 2
    cross = {
        (j, k): float(2 * (np.conj(amps[j]) * amps[k]).real)
        for j in range(len(amps))
        for k in range(j + 1, len(amps))
    }
    total = float(abs(amps.sum()) ** 2)
    return InterferenceTerms(amps, direct, cross, total)


def box_sweep(L_values, n_max: int, max_particles: int, g: float, t: float, order: int, quad_points: int, in_text: str, out_text: str):
    """Transition probability against box size (no extrapolation)."""
    rows = []
    for L in L_values:
        basis = build_fock_basis(L, n_max, max_particles)
        exp = dyson_propagator(pair_creation_interaction(basis, g), 0.0, t, order, quad_points)
        i, f = basis.parse_state(in_text), basis.parse_state(out_text)
        rows.append((float(L), s_matrix_probability(exp, i, f), exp.unitarity_defect))
    return rows
