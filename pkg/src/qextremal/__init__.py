"""Pontryagin-extremal control policies for Markovian bilinear quantum systems."""

from . import arcs, cli, dynamics, liouville, models, qre, solver
from .dynamics import (
    ControlPolicy,
    DiagnosticsTrace,
    Trajectory,
    compute_diagnostics,
    kinematic_degeneracy,
    pontryagin_function,
    propagate_costate_backward,
    propagate_state,
    singular_control_value,
    switching_derivatives,
    switching_function,
)
from .liouville import (
    ControlChannel,
    HermitianBasis,
    LiouvilleVector,
    QuantumModel,
    Superoperator,
    build_hermitian_basis,
    collision_superop,
    devectorize,
    hamiltonian_superop,
    lindblad_superop,
    vectorize,
)
from .solver import (
    ExtremalSolution,
    PeriodicMode,
    ProblemSpec,
    SolverConfig,
    TerminalMode,
    adjoint_gradient,
    optimize_free_horizon,
    periodic_costate_fixed_point,
    periodic_state_fixed_point,
    solve_periodic,
    solve_terminal,
    theorem2_consistency_check,
)

__version__ = "0.1.0"
