#!/usr/bin/env python3
"""Terminal extremals: solve, classify arcs, check corners and counting.

A bounded dipole control steering a two-level system over a short horizon
converges to a bang-bang policy whose first and last arcs sit at the bounds;
the parameter/constraint bookkeeping balances exactly for such structures.
"""

import numpy as np

from qextremal import ControlPolicy, ProblemSpec, SolverConfig, TerminalMode
from qextremal import solve_terminal, vectorize
from qextremal.arcs import (
    classify_arcs,
    count_parameters_constraints,
    theorem1_structure_report,
    verify_corner_conditions,
)
from qextremal.models import build_two_level
from qextremal.solver import initial_policies

model = build_two_level(delta=1.0, kind="closed", control_bound=1.0)
excited = vectorize(np.diag([0.0, 1.0]).astype(complex), model.basis)
spec = ProblemSpec(model=model, mode=TerminalMode(rho0=excited, horizon=1.0))
config = SolverConfig(grid=64, max_iters=400, grad_tol=1e-6, seed=1, n_starts=4)

solutions = [solve_terminal(spec, p, config)
             for p in initial_policies(model, 1.0, config)]
for i, sol in enumerate(solutions):
    print(f"start {i}: J = {sol.objective:+.6f}, converged = "
          f"{sol.record.converged} in {sol.record.iterations} iterations")
best = max(solutions, key=lambda s: s.objective)

print("\nPontryagin function constancy (range / scale):",
      best.residuals["pf_range_relative"])

segmentation = classify_arcs(best, model)[0]
print("arc structure:",
      [(seg.label, round(seg.start_time, 3), round(seg.end_time, 3))
       for seg in segmentation.segments])

for corner in verify_corner_conditions(best, model, [segmentation]):
    print(f"junction at t = {corner.junction.time:.3f} ({corner.junction.kind}): "
          f"|K jump| = {corner.pf_jump:.2e}, |K_u| = {corner.switching_abs:.2e}")

report = theorem1_structure_report(best, model, objective=spec.observable)
print("\narc-structure verdict:", report.verdict)
print("first/last labels:", report.first_labels, report.last_labels)

count = count_parameters_constraints(dimension=2,
                                     n_junctions=report.n_junctions)
print(f"unknowns P = {count.p_total}, constraints C = {count.c_total}, "
      f"resolvable: {count.resolvable}")

# the same structure with a singular terminating arc runs one constraint short
deficit = count_parameters_constraints(dimension=2,
                                       n_junctions=report.n_junctions,
                                       n_singular_terminal_arcs=1)
print("with a singular terminal arc: P - C =", deficit.deficit,
      "(requires a constraint redundancy)")
