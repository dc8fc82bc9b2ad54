#!/usr/bin/env python3
"""Operator basis and real-vector representation walkthrough.

Hermitian matrices become real coefficient vectors over an orthonormal
Hermitian basis, density matrices become trace-one vectors, and generators of
Markovian dynamics become real square matrices that annihilate the trace row.
"""

import numpy as np

from qextremal import (
    build_hermitian_basis,
    collision_superop,
    devectorize,
    hamiltonian_superop,
    lindblad_superop,
    vectorize,
)

np.set_printoptions(precision=4, suppress=True)

# --- the basis: identity/sqrt(N) plus generalized Gell-Mann matrices -------
basis = build_hermitian_basis(2)
print("basis elements (N=2), flattened:")
for i, sigma in enumerate(basis.elements):
    print(f"  sigma_{i} =", np.round(sigma, 4).tolist())
print("Gram matrix deviation from identity:",
      np.abs(basis.gram_matrix() - np.eye(4)).max())

# --- states and observables as real vectors --------------------------------
ground = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
vec = vectorize(ground, basis)
print("\nvec(|0><0|) =", vec.coeffs, " trace =", vec.trace())
print("round trip error:",
      np.abs(devectorize(vec) - ground).max())

# the trace functional <1| is a single coordinate by construction
print("<1| =", basis.trace_vector)

# --- generators -------------------------------------------------------------
sz = np.diag([1.0, -1.0]).astype(complex)
precession = hamiltonian_superop(0.5 * 1.3 * sz, basis)
print("\nLarmor generator (antisymmetric):")
print(precession.matrix)
print("trace row norm:", precession.trace_row_norm())

decay = lindblad_superop(np.array([[0, 1], [0, 0]], dtype=complex), 0.7, basis)
print("\nspontaneous decay dissipator, action on vec(|1><1|):")
excited = vectorize(np.diag([0.0, 1.0]).astype(complex), basis)
print(decay.matrix @ excited.coeffs,
      "=J gamma (vec|0><0| - vec|1><1|)")

# collision channel toward a target state: -I plus a rank-one trace coupling
target = 0.5 * np.eye(2) + 0.3 * np.array([[0, 1], [1, 0]])
coll = collision_superop(target.astype(complex), basis)
print("\ncollision channel acting on its own target (should vanish):",
      np.abs(coll.matrix @ vectorize(target.astype(complex), basis).coeffs).max())
