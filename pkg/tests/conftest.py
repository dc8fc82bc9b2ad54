import numpy as np
import pytest

from qextremal.liouville import (
    QuantumModel,
    build_hermitian_basis,
    coherent_channel,
    collision_channel,
    hamiltonian_superop,
    lindblad_superop,
    vectorize,
)
from qextremal.models import PAULI_X, PAULI_Z


def ket_dm(n, i):
    mat = np.zeros((n, n), dtype=complex)
    mat[i, i] = 1.0
    return mat


PLUS_DM = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)


@pytest.fixture(scope="session")
def basis2():
    return build_hermitian_basis(2)


@pytest.fixture(scope="session")
def basis3():
    return build_hermitian_basis(3)


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def decay_model(basis, gamma=0.8, control_bound=1.0, observable=None):
    """Pure spontaneous decay |1> -> |0> with a dipole control channel."""
    drift = lindblad_superop(np.array([[0, 1], [0, 0]], dtype=complex), gamma, basis)
    obs = vectorize(PAULI_Z if observable is None else observable, basis)
    channel = coherent_channel(-PAULI_X, basis, -control_bound, control_bound)
    return QuantumModel(basis=basis, drift=drift, controls=(channel,),
                        observable=obs)


def two_collision_model(basis, rate_max=4.0):
    """Two collision channels with non-commuting targets, coherence objective."""
    ch1 = collision_channel(ket_dm(2, 0), basis, 0.0, rate_max, label="cool")
    ch2 = collision_channel(PLUS_DM, basis, 0.0, rate_max, label="mix")
    drift = hamiltonian_superop(np.zeros((2, 2), dtype=complex), basis)
    return QuantumModel(basis=basis, drift=drift, controls=(ch1, ch2),
                        observable=vectorize(PAULI_X, basis))
