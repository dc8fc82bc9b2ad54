"""Exception types shared across the package."""


class QExtremalError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(QExtremalError, ValueError):
    """Hilbert-space dimension is not admissible (need N >= 2)."""


class HermiticityError(QExtremalError, ValueError):
    """Operator expected to be Hermitian is not, beyond tolerance."""


class ShapeError(QExtremalError, ValueError):
    """Array dimensions do not match the basis or each other."""


class NegativeRateError(QExtremalError, ValueError):
    """Dissipation rate must be non-negative."""


class StateValidityError(QExtremalError, ValueError):
    """Matrix is not a valid density matrix (trace one, positive semidefinite)."""


class BoundsError(QExtremalError, ValueError):
    """Control bounds are inconsistent (lower > upper) or violated."""


class PropagationError(QExtremalError, RuntimeError):
    """Propagation produced non-finite values or lost trace normalization."""


class DegenerateSpectrumError(QExtremalError, RuntimeError):
    """One-period propagator has a (near-)degenerate unit eigenvalue, so the
    quasistationary state is not unique."""


class NumericalRankError(QExtremalError, RuntimeError):
    """Linear system for the periodic costate is singular beyond deflation."""


class SingularPreconditionError(QExtremalError, ValueError):
    """Point does not satisfy the singular-arc preconditions (K_u and its
    derivative small)."""


class NotApplicableError(QExtremalError, ValueError):
    """Operation requires a closed (purely Hamiltonian) model."""


class EnumerationSizeError(QExtremalError, ValueError):
    """Brute-force candidate count exceeds the configured cap."""


class BracketSearchError(QExtremalError, RuntimeError):
    """Free-horizon scan found no interior optimum in the bracket."""


class ConfigError(QExtremalError, ValueError):
    """Run configuration is malformed or inconsistent."""
