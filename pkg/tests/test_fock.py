import numpy as np
import pytest
from scipy.linalg import expm

from isq.errors import BasisTooLarge, IndexOutOfRange, InvalidArgs, NotHermitian, OrderUnsupported, QuadratureUnderflow
from isq.fock import (
    build_fock_basis,
    constant_interaction,
    dyson_propagator,
    pair_creation_interaction,
    s_matrix_probability,
    term_interference,
    time_ordered_exponential,
)
from isq.quantum import PAULI_X, evolve_unitary, schur_mod_square

TWO = build_fock_basis(1.0, 1, 1)


def const(h, basis=TWO):
    return constant_interaction(basis, h)


class TestBasis:
    def test_smallest(self):
        assert TWO.states == ((0,), (1,))

    def test_enumeration_order(self):
        b = build_fock_basis(1.0, 2, 2)
        assert b.states == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

    def test_momenta(self):
        assert build_fock_basis(np.pi, 3, 1).modes[2] == pytest.approx(3.0, abs=1e-15)

    def test_deterministic(self):
        assert build_fock_basis(2.0, 4, 3).states == build_fock_basis(2.0, 4, 3).states

    def test_count(self):
        from math import comb

        assert build_fock_basis(1.0, 5, 3).size == comb(8, 3)

    def test_too_large(self):
        with pytest.raises(BasisTooLarge):
            build_fock_basis(1.0, 20, 6)

    def test_invalid(self):
        with pytest.raises(InvalidArgs):
            build_fock_basis(0.0, 1, 1)

    def test_parse(self):
        b = build_fock_basis(1.0, 3, 2)
        assert b.parse_state("vacuum") == 0
        assert b.states[b.parse_state("1,1")] == (2, 0, 0)
        assert b.states[b.parse_state("3, 1")] == (1, 0, 1)
        with pytest.raises(IndexOutOfRange):
            b.parse_state("4")
        with pytest.raises(IndexOutOfRange):
            b.parse_state("1,1,1")

    def test_energies(self):
        b = build_fock_basis(np.pi, 2, 2)
        np.testing.assert_allclose(b.energies(), [0, 1, 2, 2, 3, 4])


class TestDyson:
    def test_order_zero_identity(self):
        exp = dyson_propagator(pair_creation_interaction(build_fock_basis(10, 3, 2)), 0.0, 1.0, 0)
        np.testing.assert_array_equal(exp.partial_sum, np.eye(10))
        assert exp.terms == ()

    def test_order_one_constant(self):
        exp = dyson_propagator(const(PAULI_X), 0.2, 0.5, 1)
        np.testing.assert_allclose(exp.terms[0], -1j * PAULI_X * 0.3, atol=1e-15)

    def test_constant_terms_match_taylor(self):
        h = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, -0.4]])
        exp = dyson_propagator(const(h), 0.0, 0.7, 4)
        for k, term in enumerate(exp.terms, start=1):
            expected = np.linalg.matrix_power(-1j * h * 0.7, k) / np.prod(range(1, k + 1))
            assert np.abs(term - expected).max() <= 1e-14

    def test_pauli_order_three(self):
        exp = dyson_propagator(const(PAULI_X), 0.0, 0.1, 3)
        assert np.abs(exp.partial_sum - evolve_unitary(PAULI_X, 0.1).entries).max() <= 1e-5

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_convergence_order(self, n):
        def err(dt):
            exp = dyson_propagator(const(PAULI_X), 0.0, dt, n)
            return np.abs(exp.partial_sum - evolve_unitary(PAULI_X, dt).entries).max()

        assert err(0.1) / err(0.05) >= 2 ** (n + 0.5)

    def test_time_dependent_against_product_formula(self):
        H = pair_creation_interaction(build_fock_basis(10.0, 3, 2), 0.1)
        exp = dyson_propagator(H, 0.0, 1.0, 4)
        ref = time_ordered_exponential(H, 0.0, 1.0, 4000)
        assert np.abs(exp.partial_sum - ref).max() <= 1e-5

    def test_unitarity_defect_shrinks_with_order(self):
        H = pair_creation_interaction(build_fock_basis(10.0, 3, 2), 0.3)
        defects = [dyson_propagator(H, 0.0, 1.0, n).unitarity_defect for n in (1, 2, 3, 4)]
        assert all(a > b for a, b in zip(defects, defects[1:]))

    def test_errors(self):
        H = const(PAULI_X)
        with pytest.raises(OrderUnsupported):
            dyson_propagator(H, 0.0, 1.0, 5)
        with pytest.raises(InvalidArgs):
            dyson_propagator(H, 1.0, 1.0, 1)
        with pytest.raises(InvalidArgs):
            dyson_propagator(H, 0.0, 1.0, 1, quad_points=4)
        with pytest.raises(QuadratureUnderflow):
            dyson_propagator(H, 1e6, np.nextafter(1e6, 2e6), 1)

    def test_hermiticity_checked(self):
        with pytest.raises(NotHermitian):
            dyson_propagator(const([[0, 1], [0, 0]]), 0.0, 1.0, 1)


class TestSMatrix:
    def test_identity(self):
        for i in range(2):
            for f in range(2):
                assert s_matrix_probability(np.eye(2), i, f) == float(i == f)

    def test_exact_unitary_rows_sum_to_one(self):
        h = np.array([[0.2, 0.5, 0.0], [0.5, -0.1, 0.3j], [0.0, -0.3j, 0.4]])
        u = expm(-1j * h * 1.3)
        for i in range(3):
            assert sum(s_matrix_probability(u, i, f) for f in range(3)) == pytest.approx(1.0, abs=1e-12)
        g = np.array([[s_matrix_probability(u, j, i) for j in range(3)] for i in range(3)])
        np.testing.assert_allclose(g, schur_mod_square(u).entries, atol=1e-14)
        np.testing.assert_allclose(g.sum(axis=0), 1, atol=1e-12)
        np.testing.assert_allclose(g.sum(axis=1), 1, atol=1e-12)

    def test_truncated_defect_tracks_row_sum(self):
        exp = dyson_propagator(const(PAULI_X), 0.0, 0.5, 2)
        total = sum(s_matrix_probability(exp, 0, f) for f in range(2))
        assert abs(total - 1) <= exp.unitarity_defect + 1e-15

    def test_bad_index(self):
        with pytest.raises(IndexOutOfRange):
            s_matrix_probability(np.eye(2), 0, 2)


class TestInterference:
    def test_single_contribution(self):
        exp = dyson_propagator(const(PAULI_X), 0.0, 0.3, 1)
        terms = term_interference(exp, 0, 1)
        assert terms.amplitudes[0] == 0
        assert terms.total == pytest.approx(abs(terms.amplitudes[1]) ** 2, abs=1e-16)
        assert terms.cross_sum == 0.0

    def test_second_order_reduces_staying(self):
        dt = 0.2
        exp = dyson_propagator(const(PAULI_X), 0.0, dt, 2)
        terms = term_interference(exp, 0, 0)
        assert terms.cross[(0, 2)] < 0
        assert terms.total == pytest.approx(abs(1 - dt**2 / 2) ** 2, abs=1e-14)

    def test_identity(self):
        H = pair_creation_interaction(build_fock_basis(10.0, 3, 2), 0.4)
        exp = dyson_propagator(H, 0.0, 2.0, 4)
        for i in range(exp.dim):
            for f in range(exp.dim):
                t = term_interference(exp, i, f)
                assert abs(t.total - (t.direct.sum() + t.cross_sum)) <= 1e-14

    def test_bad_index(self):
        exp = dyson_propagator(const(PAULI_X), 0.0, 0.3, 1)
        with pytest.raises(IndexOutOfRange):
            term_interference(exp, 0, 5)
