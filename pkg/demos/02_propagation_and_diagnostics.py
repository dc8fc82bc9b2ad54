#!/usr/bin/env python3
"""Propagation oracles and Pontryagin-function diagnostics.

Checks the exact interval exponentials against the Rabi and exponential-decay
closed forms, then propagates a costate backward and inspects the switching
function and its commutator time-derivatives.
"""

import numpy as np

from qextremal import (
    ControlPolicy,
    LiouvilleVector,
    compute_diagnostics,
    pontryagin_function,
    propagate_costate_backward,
    propagate_state,
    switching_derivatives,
    switching_function,
    vectorize,
)
from qextremal.models import PAULI_X, build_two_level

np.set_printoptions(precision=6, suppress=True)

# --- Rabi oscillation under a constant drive --------------------------------
model = build_two_level(delta=0.0, kind="closed", control_bound=2.0)
basis = model.basis
ground = vectorize(np.diag([1.0, 0.0]).astype(complex), basis)
u = 0.8
policy = ControlPolicy(values=np.full((1, 200), u), h=2.0 / 200,
                       bounds=model.bounds_array())
traj = propagate_state(model, policy, ground)
p_excited = np.array([
    LiouvilleVector(coeffs=s.copy(), basis=basis).to_matrix()[1, 1].real
    for s in traj.states
])
print("Rabi oracle max error:",
      np.abs(p_excited - np.sin(u * policy.times) ** 2).max())

# --- decay under a thermalizing drift ---------------------------------------
thermal = build_two_level(delta=1.2, kind="thermal", gamma=0.5, p_excited=0.1,
                          control_bound=1.0, observable=PAULI_X)
excited = vectorize(np.diag([0.0, 1.0]).astype(complex), basis)
rng = np.random.default_rng(0)
policy = ControlPolicy(values=rng.uniform(-1, 1, size=(1, 64)), h=1.0 / 64,
                       bounds=thermal.bounds_array())
forward = propagate_state(thermal, policy, excited)
backward = propagate_costate_backward(thermal, policy, thermal.observable)
joint = forward.with_costates(backward.costates)
print("duality invariant <psi|rho> drift over the grid:",
      np.abs(np.einsum("mi,mi->m", joint.costates, joint.states)
             - joint.costates[-1] @ joint.states[-1]).max())

# --- pointwise diagnostics ---------------------------------------------------
mid = 32
psi, rho = joint.costates[mid], joint.states[mid]
u_mid = policy.values[:, mid]
print("\nat t =", round(policy.times[mid], 3))
print("  K           =", pontryagin_function(psi, rho, thermal, u_mid))
print("  K_u         =", switching_function(psi, rho, thermal, 0))
first, (a, b) = switching_derivatives(psi, rho, thermal, 0, u_mid)
print("  dK_u/dt     =", first)
print("  d2K_u/dt2   =", a, "+ u *", b)

diag = compute_diagnostics(thermal, policy, joint)
print("\nPontryagin function along this (non-extremal) policy:")
print("  K range:", diag.pf.max() - diag.pf.min(),
      " (constant only on converged extremals)")
print("  switching-function trace, first nodes:", diag.switching[0, :5])
