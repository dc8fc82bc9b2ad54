import numpy as np
import pytest

from qextremal.errors import (
    HermiticityError,
    InvalidDimensionError,
    NegativeRateError,
    ShapeError,
    StateValidityError,
)
from qextremal.liouville import (
    build_hermitian_basis,
    collision_superop,
    devectorize,
    hamiltonian_superop,
    lindblad_superop,
    superop_from_action,
    vectorize,
)
from qextremal.models import PAULI_X, PAULI_Y, PAULI_Z

from conftest import ket_dm, random_hermitian


class TestBasis:
    def test_pauli_basis(self, basis2):
        s = np.sqrt(2.0)
        for got, want in zip(basis2.elements,
                             [np.eye(2) / s, PAULI_X / s, PAULI_Y / s, PAULI_Z / s]):
            assert np.abs(got - want).max() < 1e-15

    def test_gram_identity_n3(self, basis3):
        gram = np.zeros((9, 9))
        for i in range(9):
            for j in range(9):
                gram[i, j] = np.trace(basis3.elements[i] @ basis3.elements[j]).real
        assert np.abs(gram - np.eye(9)).max() < 1e-12
        assert np.abs(basis3.gram_matrix() - np.eye(9)).max() < 1e-12

    @pytest.mark.parametrize("n", range(2, 9))
    def test_gram_identity_all_dims(self, n):
        basis = build_hermitian_basis(n)
        assert np.abs(basis.gram_matrix() - np.eye(n * n)).max() < 1e-12
        for el in basis.elements:
            assert np.abs(el - el.conj().T).max() < 1e-12
        assert np.abs(basis.elements[0] - np.eye(n) / np.sqrt(n)).max() < 1e-15

    def test_invalid_dimension(self):
        with pytest.raises(InvalidDimensionError):
            build_hermitian_basis(1)
        with pytest.raises(InvalidDimensionError):
            build_hermitian_basis(0)


class TestVectorize:
    def test_ground_state(self, basis2):
        vec = vectorize(ket_dm(2, 0), basis2)
        assert np.abs(vec.coeffs - np.array([1, 0, 0, 1]) / np.sqrt(2)).max() < 1e-15

    def test_identity_is_trace_functional(self, basis2):
        vec = vectorize(np.eye(2, dtype=complex), basis2)
        assert np.abs(vec.coeffs - np.array([np.sqrt(2), 0, 0, 0])).max() < 1e-15
        assert np.abs(vec.coeffs - basis2.trace_vector).max() < 1e-15

    def test_single_gellmann_component(self, basis3):
        op = np.zeros((3, 3), dtype=complex)
        op[1, 2] = op[2, 1] = 1.0
        expected = np.array(
            [np.trace(sig @ op).real for sig in basis3.elements]
        )
        vec = vectorize(op, basis3)
        assert np.abs(vec.coeffs - expected).max() < 1e-14
        # exactly one unit coefficient (sqrt(2) normalization of the element)
        nonzero = np.flatnonzero(np.abs(vec.coeffs) > 1e-12)
        assert len(nonzero) == 1
        assert abs(vec.coeffs[nonzero[0]] - np.sqrt(2)) < 1e-14

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_round_trip(self, n):
        rng = np.random.default_rng(42 + n)
        basis = build_hermitian_basis(n)
        for _ in range(100):
            op = random_hermitian(rng, n)
            back = devectorize(vectorize(op, basis))
            assert np.abs(back - op).max() < 1e-13

    def test_rejects_non_hermitian(self, basis2):
        with pytest.raises(HermiticityError):
            vectorize(np.array([[0.0, 1.0], [0.0, 0.0]]), basis2)

    def test_rejects_dimension_mismatch(self, basis3):
        with pytest.raises(ShapeError):
            vectorize(np.eye(2), basis3)

    def test_coefficients_are_real_arrays(self, basis2):
        vec = vectorize(PAULI_Y, basis2)
        assert vec.coeffs.dtype == np.float64


class TestHamiltonianSuperop:
    def test_sigma_z_rotation(self, basis2):
        omega = 1.7
        sup = hamiltonian_superop(0.5 * omega * PAULI_Z, basis2)
        vec_x = vectorize(PAULI_X / np.sqrt(2), basis2)
        vec_y = vectorize(PAULI_Y / np.sqrt(2), basis2)
        assert np.abs(sup.matrix @ vec_x.coeffs - omega * vec_y.coeffs).max() < 1e-12
        assert np.abs(sup.matrix @ vec_y.coeffs + omega * vec_x.coeffs).max() < 1e-12

    def test_identity_hamiltonian_is_zero(self, basis2):
        sup = hamiltonian_superop(np.eye(2, dtype=complex), basis2)
        assert np.abs(sup.matrix).max() < 1e-14

    def test_antisymmetric_and_trace_free(self):
        rng = np.random.default_rng(7)
        for n in (2, 3, 4):
            basis = build_hermitian_basis(n)
            sup = hamiltonian_superop(random_hermitian(rng, n), basis)
            assert np.abs(sup.matrix + sup.matrix.T).max() < 1e-12
            assert sup.trace_row_norm() < 1e-11

    def test_rejects_non_hermitian(self, basis2):
        with pytest.raises(HermiticityError):
            hamiltonian_superop(np.array([[0, 1], [0, 0]], dtype=complex), basis2)


class TestLindbladSuperop:
    def test_ground_state_is_dark(self, basis2):
        sup = lindblad_superop(np.array([[0, 1], [0, 0]], dtype=complex), 0.9, basis2)
        vec = vectorize(ket_dm(2, 0), basis2)
        assert np.abs(sup.matrix @ vec.coeffs).max() < 1e-14

    def test_decay_action_on_excited_state(self, basis2):
        gamma = 1.3
        jump = np.array([[0, 1], [0, 0]], dtype=complex)
        sup = lindblad_superop(jump, gamma, basis2)
        rho = ket_dm(2, 1)
        # direct 2x2 dissipator evaluation as the oracle
        ld = jump.conj().T
        expected_mat = gamma * (jump @ rho @ ld
                                - 0.5 * (ld @ jump @ rho + rho @ ld @ jump))
        got = sup.matrix @ vectorize(rho, basis2).coeffs
        assert np.abs(got - vectorize(expected_mat, basis2).coeffs).max() < 1e-13
        want = gamma * (vectorize(ket_dm(2, 0), basis2).coeffs
                        - vectorize(ket_dm(2, 1), basis2).coeffs)
        assert np.abs(got - want).max() < 1e-13

    def test_zero_rate(self, basis2):
        sup = lindblad_superop(PAULI_X, 0.0, basis2)
        assert np.abs(sup.matrix).max() == 0.0

    def test_negative_rate(self, basis2):
        with pytest.raises(NegativeRateError):
            lindblad_superop(PAULI_X, -0.1, basis2)

    def test_trace_preserving(self):
        rng = np.random.default_rng(11)
        for n in (2, 3):
            basis = build_hermitian_basis(n)
            jump = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            sup = lindblad_superop(jump, 0.7, basis)
            assert sup.trace_row_norm() < 1e-11

    def test_entries_match_direct_action(self, basis3):
        rng = np.random.default_rng(13)
        jump = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        gamma = 0.4
        sup = lindblad_superop(jump, gamma, basis3)
        ld = jump.conj().T

        def action(x):
            return gamma * (jump @ x @ ld - 0.5 * (ld @ jump @ x + x @ ld @ jump))

        for sig in basis3.elements:
            direct = vectorize(action(sig), basis3, atol=1e-8).coeffs
            via_matrix = sup.matrix @ vectorize(sig, basis3).coeffs
            assert np.linalg.norm(via_matrix - direct) < 1e-11


class TestCollisionSuperop:
    def test_equilibrium_of_own_channel(self, basis2):
        target = ket_dm(2, 0)
        sup = collision_superop(target, basis2)
        assert np.abs(sup.matrix @ vectorize(target, basis2).coeffs).max() < 1e-14

    def test_action_on_excited(self, basis2):
        sup = collision_superop(ket_dm(2, 0), basis2)
        got = sup.matrix @ vectorize(ket_dm(2, 1), basis2).coeffs
        want = (vectorize(ket_dm(2, 0), basis2).coeffs
                - vectorize(ket_dm(2, 1), basis2).coeffs)
        assert np.abs(got - want).max() < 1e-14

    def test_action_on_maximally_mixed(self, basis3):
        rng = np.random.default_rng(23)
        herm = random_hermitian(rng, 3)
        target = herm @ herm.conj().T
        target = target / np.trace(target).real
        sup = collision_superop(target, basis3)
        mixed = vectorize(np.eye(3, dtype=complex) / 3, basis3)
        got = sup.matrix @ mixed.coeffs
        want = vectorize(target, basis3).coeffs - mixed.coeffs
        assert np.abs(got - want).max() < 1e-13

    def test_trace_row_vanishes(self, basis2):
        sup = collision_superop(ket_dm(2, 1), basis2)
        assert sup.trace_row_norm() < 1e-12

    def test_rejects_invalid_state(self, basis2):
        with pytest.raises(StateValidityError):
            collision_superop(np.diag([0.5, 0.6]).astype(complex), basis2)
        with pytest.raises(StateValidityError):
            collision_superop(np.diag([1.5, -0.5]).astype(complex), basis2)


class TestSuperopProperties:
    def test_sum_annihilates_trace_functional(self, basis3):
        rng = np.random.default_rng(31)
        total = hamiltonian_superop(random_hermitian(rng, 3), basis3)
        total = total + lindblad_superop(rng.normal(size=(3, 3)), 0.3, basis3)
        assert total.trace_row_norm() < 1e-11

    def test_superop_from_action_rejects_non_hermitian_maps(self, basis2):
        with pytest.raises(HermiticityError):
            superop_from_action(lambda x: 1j * x, basis2)

    def test_real_coefficient_propagation(self, basis2):
        rng = np.random.default_rng(37)
        sup = hamiltonian_superop(random_hermitian(rng, 2), basis2)
        vec = vectorize(random_hermitian(rng, 2), basis2)
        out = sup.matrix @ vec.coeffs
        assert out.dtype == np.float64
