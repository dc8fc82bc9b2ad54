#!/usr/bin/env python3
"""Periodic coherence pumping in the three-level Lambda system.

Optimizes the laser instantaneous-frequency modulation that maximizes the
quasistationary ground-doublet coherence over one period, compares with the
harmonic reference policy, and probes the period-doubling improvement.

Uses a reduced grid and iteration budget so the script runs in tens of
seconds; the acceptance suite runs the full-resolution version.
"""

import numpy as np

from qextremal import ControlPolicy, PeriodicMode, ProblemSpec, SolverConfig
from qextremal import solve_periodic
from qextremal.arcs import detect_spikes
from qextremal.models import LambdaSystemParams, build_lambda_system
from qextremal.solver import (
    periodic_state_fixed_point,
    resolve_bounds,
    theorem2_consistency_check,
)

PERIOD = 0.626  # us, the harmonic reference period


def harmonic_policy(bounds, n_intervals):
    h = PERIOD / n_intervals
    mids = (np.arange(n_intervals) + 0.5) * h
    values = -1.58 + 1.61 * np.cos(2 * np.pi * mids / PERIOD)  # MHz
    return ControlPolicy(values=values[None, :], h=h, bounds=bounds)


model = build_lambda_system(LambdaSystemParams())
bounds = resolve_bounds(model, SolverConfig())
print("detuning control treated as unbounded; solver box: "
      f"+-{bounds[0, 1]:.1f} MHz")

harmonic = harmonic_policy(bounds, 256)
rho_star = periodic_state_fixed_point(model, harmonic)
j_harmonic = float(model.observable.coeffs @ rho_star.coeffs)
print(f"harmonic reference: J = {j_harmonic:.6f}")

spec = ProblemSpec(model=model, mode=PeriodicMode(period=PERIOD))
policy, solution = harmonic_policy(bounds, 64), None
for grid, iters in ((64, 500), (128, 500), (256, 600)):
    solution = solve_periodic(spec, policy,
                              SolverConfig(grid=grid, max_iters=iters,
                                           grad_tol=3e-4, seed=0))
    print(f"  grid {grid}: J = {solution.objective:.6f} "
          f"(residual {solution.record.residual:.1e})")
    if grid < 256:
        policy = solution.policy.refined(2)

ratio = j_harmonic / solution.objective
print(f"J_harmonic / J_optimized = {ratio:.4f} "
      "(the paper quotes a ~7% gap at full convergence)")

for spike in detect_spikes(solution.policy):
    phase_area = 2 * np.pi * spike.area  # MHz us -> radians
    print(f"near-delta feature on [{spike.start_time:.3f}, "
          f"{spike.end_time:.3f}] us, phase area = {phase_area / np.pi:+.3f} pi")

check = theorem2_consistency_check(spec, solution, n=2)
print(f"\nperiod-doubling check (n = 2): PMP violation {check.violation:.2e} "
      f"> 0, so the period-T extremal is only locally optimal")
print("costate contraction per period <= |lambda_2| ="
      f" {check.second_eigenvalue_abs:.3f}")
