"""Piecewise-constant propagation and Pontryagin-function diagnostics.

Controls are piecewise constant on a uniform grid, so each interval is an
exact matrix exponential of a fixed generator.  The Pontryagin function
K = <psi| L(u) |rho> is then an exact invariant of the joint state/costate
flow inside every interval, and the per-interval gradient of the objective is
the exact integral of the switching function over the interval (computed with
a Van Loan block exponential, not quadrature).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from .errors import (
    BoundsError,
    NotApplicableError,
    PropagationError,
    ShapeError,
    SingularPreconditionError,
)
from .liouville import LiouvilleVector, QuantumModel

__all__ = [
    "ControlPolicy",
    "Trajectory",
    "DiagnosticsTrace",
    "SingularControl",
    "propagate_state",
    "propagate_costate_backward",
    "one_period_propagator",
    "interval_propagators",
    "control_integral_blocks",
    "pontryagin_function",
    "switching_function",
    "switching_derivatives",
    "singular_control_value",
    "kinematic_degeneracy",
    "compute_diagnostics",
]

BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class ControlPolicy:
    """Piecewise-constant multi-channel control on a uniform time grid."""

    values: np.ndarray  # (K, M)
    h: float
    bounds: np.ndarray  # (K, 2)
    t0: float = 0.0

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", values)
        bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "bounds", bounds)
        if self.h <= 0:
            raise BoundsError(f"grid step must be positive, got {self.h}")
        if values.ndim != 2 or values.shape[1] < 1:
            raise ShapeError("policy needs at least one interval")
        if bounds.shape[0] != values.shape[0]:
            raise ShapeError("one bound pair per channel required")
        lo, hi = bounds[:, :1], bounds[:, 1:]
        if np.any(lo > hi):
            raise BoundsError("lower bound exceeds upper bound")
        below = np.isfinite(lo) & (values < lo - BOUND_SLACK)
        above = np.isfinite(hi) & (values > hi + BOUND_SLACK)
        if below.any() or above.any():
            k, m = np.argwhere(below | above)[0]
            raise BoundsError(
                f"control {k} violates its bounds on interval {m}: "
                f"{values[k, m]} outside [{lo[k, 0]}, {hi[k, 0]}]"
            )
        values.setflags(write=False)
        bounds.setflags(write=False)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.values.shape[1]

    @property
    def duration(self) -> float:
        return self.h * self.n_intervals

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_intervals + 1)

    def with_values(self, values: np.ndarray) -> "ControlPolicy":
        return replace(self, values=np.asarray(values, dtype=float))

    def refined(self, factor: int) -> "ControlPolicy":
        """Same control function on a grid `factor` times finer."""
        if factor < 1 or int(factor) != factor:
            raise ValueError("refinement factor must be a positive integer")
        return replace(self, values=np.repeat(self.values, factor, axis=1),
                       h=self.h / factor)

    def repeated(self, n: int) -> "ControlPolicy":
        """The policy tiled n times (horizon n * duration)."""
        if n < 1:
            raise ValueError("repetition count must be >= 1")
        return replace(self, values=np.tile(self.values, (1, n)))


@dataclass(frozen=True)
class Trajectory:
    """Grid samples of the state and (optionally) the costate."""

    times: np.ndarray           # (M+1,)
    states: np.ndarray | None = None    # (M+1, N^2)
    costates: np.ndarray | None = None  # (M+1, N^2)

    def with_costates(self, costates: np.ndarray) -> "Trajectory":
        return replace(self, costates=costates)

    def normalization_residual(self) -> float:
        """max_t |<psi(t)|rho(t)>| over the grid."""
        if self.states is None or self.costates is None:
            raise ValueError("both states and costates required")
        return float(np.abs(np.einsum("mi,mi->m", self.costates, self.states)).max())


def _model_arrays(model: QuantumModel):
    return model.drift.matrix, model.control_matrices()


def interval_generators(model: QuantumModel, policy: ControlPolicy) -> np.ndarray:
    """(M, n, n) stack of per-interval generators L0 + sum_k u_k L_k."""
    drift, ctrls = _model_arrays(model)
    if policy.n_channels != model.n_controls:
        raise ShapeError(
            f"policy has {policy.n_channels} channels, model has {model.n_controls}"
        )
    gens = np.tensordot(policy.values.T, ctrls, axes=([1], [0])) if len(ctrls) else 0.0
    return drift[None, :, :] + gens


def _unique_columns(values: np.ndarray):
    """Unique control vectors and the inverse map interval -> unique index."""
    uniq, inverse = np.unique(values.T, axis=0, return_inverse=True)
    return uniq, inverse.ravel()


def interval_propagators(model: QuantumModel, policy: ControlPolicy) -> np.ndarray:
    """(M, n, n) stack of exp(h * G_m), deduplicated over repeated controls."""
    drift, ctrls = _model_arrays(model)
    uniq, inverse = _unique_columns(policy.values)
    gens = drift[None, :, :] + (
        np.tensordot(uniq, ctrls, axes=([1], [0])) if len(ctrls) else 0.0
    )
    props = expm(policy.h * gens)
    if not np.isfinite(props).all():
        bad = int(np.argwhere(~np.isfinite(props).all(axis=(1, 2)))[0][0])
        m = int(np.argwhere(inverse == bad)[0][0])
        raise PropagationError(f"matrix exponential not finite on interval {m}")
    return props[inverse]


def propagate_state(model: QuantumModel, policy: ControlPolicy,
                    rho0: LiouvilleVector, trace_tol: float = 1e-9) -> Trajectory:
    """March the state through every interval with exact exponentials."""
    props = interval_propagators(model, policy)
    n = model.dim
    states = np.empty((policy.n_intervals + 1, n))
    states[0] = rho0.coeffs
    for m, prop in enumerate(props):
        states[m + 1] = prop @ states[m]
        if not np.isfinite(states[m + 1]).all():
            raise PropagationError(f"state became non-finite on interval {m}")
    traces = model.basis.trace_vector @ states.T
    worst = np.abs(traces - 1.0).max()
    if worst > trace_tol:
        m = int(np.abs(traces - 1.0).argmax())
        raise PropagationError(
            f"trace deviates by {worst:.3g} at node {m}; generator is not "
            "trace-preserving or the step overflowed"
        )
    return Trajectory(times=policy.times, states=states)


def propagate_costate_backward(model: QuantumModel, policy: ControlPolicy,
                               psi_final: LiouvilleVector | np.ndarray) -> Trajectory:
    """Adjoint march: <psi(t_m)| = <psi(t_{m+1})| exp(h G_m)."""
    props = interval_propagators(model, policy)
    psi_T = psi_final.coeffs if isinstance(psi_final, LiouvilleVector) else np.asarray(psi_final)
    costates = np.empty((policy.n_intervals + 1, model.dim))
    costates[-1] = psi_T
    for m in range(policy.n_intervals - 1, -1, -1):
        costates[m] = props[m].T @ costates[m + 1]
        if not np.isfinite(costates[m]).all():
            raise PropagationError(f"costate became non-finite on interval {m}")
    return Trajectory(times=policy.times, costates=costates)


def one_period_propagator(model: QuantumModel, policy: ControlPolicy) -> np.ndarray:
    """Prop(T, t0) as the ordered product of the interval exponentials."""
    props = interval_propagators(model, policy)
    total = np.eye(model.dim)
    for prop in props:
        total = prop @ total
    return total


def control_integral_blocks(model: QuantumModel, policy: ControlPolicy,
                            channel: int) -> np.ndarray:
    """Exact integral int_0^h exp((h-s)G_m) L_k exp(s G_m) ds per interval.

    Uses the block-triangular (Van Loan) exponential
    expm(h [[G, L_k], [0, G]]), whose upper-right block is the integral.
    """
    drift, ctrls = _model_arrays(model)
    n = model.dim
    uniq, inverse = _unique_columns(policy.values)
    gens = drift[None, :, :] + np.tensordot(uniq, ctrls, axes=([1], [0]))
    blocks = np.zeros((len(uniq), 2 * n, 2 * n))
    blocks[:, :n, :n] = gens
    blocks[:, n:, n:] = gens
    blocks[:, :n, n:] = ctrls[channel]
    big = expm(policy.h * blocks)
    return big[inverse][:, :n, n:]


def adjoint_interval_gradient(model: QuantumModel, policy: ControlPolicy,
                              states: np.ndarray, costates: np.ndarray) -> np.ndarray:
    """(K, M) array dJ/du[k][m] = <psi(t_{m+1})| C_int_k(m) |rho(t_m)>."""
    grad = np.empty((model.n_controls, policy.n_intervals))
    for k in range(model.n_controls):
        blocks = control_integral_blocks(model, policy, k)
        grad[k] = np.einsum("mi,mij,mj->m", costates[1:], blocks, states[:-1])
    return grad


# ---------------------------------------------------------------------------
# Pointwise Pontryagin diagnostics
# ---------------------------------------------------------------------------

def _coeffs(x) -> np.ndarray:
    return x.coeffs if isinstance(x, LiouvilleVector) else np.asarray(x, dtype=float)


def pontryagin_function(psi, rho, model: QuantumModel, u) -> float:
    """K = <psi| (L0 + sum_k u_k L_k) |rho>; linear in every u_k."""
    p, r = _coeffs(psi), _coeffs(rho)
    if p.shape != (model.dim,) or r.shape != (model.dim,):
        raise ShapeError("state/costate dimension does not match the model")
    return float(p @ (model.generator(u) @ r))


def switching_function(psi, rho, model: QuantumModel, channel: int) -> float:
    """K_u_k = <psi| L_k |rho>."""
    p, r = _coeffs(psi), _coeffs(rho)
    if p.shape != (model.dim,) or r.shape != (model.dim,):
        raise ShapeError("state/costate dimension does not match the model")
    return float(p @ (model.controls[channel].superop.matrix @ r))


def _frozen_remainder(model: QuantumModel, channel: int, u) -> np.ndarray:
    """L_c = L0 + sum_{l != k} u_l L_l with channel k excluded."""
    u = np.asarray(u, dtype=float)
    mat = model.drift.matrix.copy()
    for l, ch in enumerate(model.controls):
        if l != channel:
            mat += u[l] * ch.superop.matrix
    return mat


def switching_derivatives(psi, rho, model: QuantumModel, channel: int, u):
    """Time derivatives of K_u_k along the flow with the remainder frozen.

    Returns (dK_u/dt, (a, b)) where d2K_u/dt2 = a + u_k * b:
      dK_u/dt = <psi|[L_k, L_c]|rho>
      a       = <psi|[[L_k, L_c], L_c]|rho>
      b       = <psi|[[L_k, L_c], L_k]|rho>
    """
    p, r = _coeffs(psi), _coeffs(rho)
    lk = model.controls[channel].superop.matrix
    lc = _frozen_remainder(model, channel, u)
    comm = lk @ lc - lc @ lk
    first = float(p @ (comm @ r))
    ca = comm @ lc - lc @ comm
    cb = comm @ lk - lk @ comm
    return first, (float(p @ (ca @ r)), float(p @ (cb @ r)))


@dataclass(frozen=True)
class SingularControl:
    """Outcome of the singular-control evaluation at one point."""

    value: float | None
    branch_point: bool
    in_bounds: bool | None = None
    numerator: float = 0.0
    denominator: float = 0.0


def singular_control_value(psi, rho, model: QuantumModel, channel: int, u,
                           ku_scale: float = 1.0,
                           singular_tol: float = 1e-6,
                           branch_tol: float = 1e-10) -> SingularControl:
    """Control value keeping d2 K_u / dt2 = 0 on a singular arc.

    Requires the point to satisfy the singular conditions (K_u and dK_u/dt
    below singular_tol * ku_scale).  When the denominator bracket
    <psi|[[L_k,L_c],L_k]|rho> vanishes relative to branch_tol the junction is
    a branch point and no unique continuation exists.
    """
    ku = switching_function(psi, rho, model, channel)
    dku, (a, b) = switching_derivatives(psi, rho, model, channel, u)
    gate = singular_tol * max(ku_scale, 1e-300)
    if abs(ku) > gate or abs(dku) > gate * max(1.0, model.drift_scale()):
        raise SingularPreconditionError(
            f"point is not singular: |K_u|={abs(ku):.3g}, |dK_u/dt|={abs(dku):.3g}, "
            f"gate={gate:.3g}"
        )
    p, r = _coeffs(psi), _coeffs(rho)
    lk = model.controls[channel].superop.matrix
    lc = _frozen_remainder(model, channel, u)
    comm_norm = np.linalg.norm(lk @ lc - lc @ lk, 2)
    den_scale = comm_norm * np.linalg.norm(lk, 2) * np.linalg.norm(p) * np.linalg.norm(r)
    if abs(b) <= branch_tol * max(den_scale, 1e-300):
        return SingularControl(value=None, branch_point=True,
                               numerator=a, denominator=b)
    value = -a / b
    lo, hi = model.controls[channel].lower, model.controls[channel].upper
    return SingularControl(value=value, branch_point=False,
                           in_bounds=bool(lo - BOUND_SLACK <= value <= hi + BOUND_SLACK),
                           numerator=a, denominator=b)


def kinematic_degeneracy(model: QuantumModel, rho, obs_frame) -> float:
    """Frobenius norm of [rho(t), O~(t)] for closed models.

    O~ is the objective observable carried backward to the same instant; its
    commutator with the state vanishes identically exactly at the kinematic
    critical points where the arc-structure theorem degenerates.
    """
    if not model.is_closed():
        raise NotApplicableError("kinematic degeneracy is defined for closed models")
    rmat = LiouvilleVector(coeffs=_coeffs(rho).copy(), basis=model.basis).to_matrix()
    omat = LiouvilleVector(coeffs=_coeffs(obs_frame).copy(), basis=model.basis).to_matrix()
    comm = rmat @ omat - omat @ rmat
    return float(np.linalg.norm(comm))


# ---------------------------------------------------------------------------
# Trace-level diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsTrace:
    """Node samples of K, the switching functions and their derivatives.

    Node m carries the value computed with the control of interval m (right
    continuous); the final node reuses the last interval.  d2K_u/dt2 at node m
    equals d2ku_drift + u_k * d2ku_control.  The degeneracy column is present
    for closed models only.
    """

    times: np.ndarray
    pf: np.ndarray              # (M+1,)
    switching: np.ndarray       # (K, M+1)
    switching_rate: np.ndarray  # (K, M+1)
    d2ku_drift: np.ndarray      # (K, M+1)
    d2ku_control: np.ndarray    # (K, M+1)
    degeneracy: np.ndarray | None = None

    def pf_range(self) -> float:
        return float(self.pf.max() - self.pf.min())


def compute_diagnostics(model: QuantumModel, policy: ControlPolicy,
                        trajectory: Trajectory) -> DiagnosticsTrace:
    if trajectory.states is None or trajectory.costates is None:
        raise ValueError("diagnostics require both state and costate samples")
    states, costates = trajectory.states, trajectory.costates
    n_nodes = states.shape[0]
    kk = model.n_controls
    node_u = np.concatenate([policy.values, policy.values[:, -1:]], axis=1)

    drift, ctrls = _model_arrays(model)
    drift_part = np.einsum("mi,ij,mj->m", costates, drift, states)
    sw = np.einsum("mi,kij,mj->km", costates, ctrls, states)
    pf = drift_part + np.einsum("km,km->m", node_u, sw)

    rate = np.empty((kk, n_nodes))
    d2a = np.empty((kk, n_nodes))
    d2b = np.empty((kk, n_nodes))
    for m in range(n_nodes):
        for k in range(kk):
            first, (a, b) = switching_derivatives(
                costates[m], states[m], model, k, node_u[:, m]
            )
            rate[k, m], d2a[k, m], d2b[k, m] = first, a, b

    degeneracy = None
    if model.is_closed():
        degeneracy = np.empty(n_nodes)
        for m in range(n_nodes):
            degeneracy[m] = kinematic_degeneracy(model, states[m], costates[m])

    out = DiagnosticsTrace(times=trajectory.times, pf=pf, switching=sw,
                           switching_rate=rate, d2ku_drift=d2a, d2ku_control=d2b,
                           degeneracy=degeneracy)
    for arr in (out.pf, out.switching, out.switching_rate):
        if not np.isfinite(arr).all():
            raise PropagationError("diagnostics trace contains non-finite values")
    return out
