"""Terminal and periodic extremal solvers.

Both solvers run projected adjoint-gradient ascent (spectral step with a
monotone Armijo backtracking line search along the projection arc).  Fixed
points of the iteration are exactly the grid versions of the first-order
optimality conditions: every interval either has a vanishing feasible-ascent
gradient component or sits at a bound with the matching switching-function
sign.  The periodic solver closes the loop through the quasistationary state
(unit eigenvector of the one-period propagator) and the matching costate
fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    ControlPolicy,
    DiagnosticsTrace,
    Trajectory,
    adjoint_interval_gradient,
    compute_diagnostics,
    one_period_propagator,
    propagate_costate_backward,
    propagate_state,
)
from .errors import (
    BoundsError,
    BracketSearchError,
    ConfigError,
    DegenerateSpectrumError,
    NumericalRankError,
)
from .liouville import LiouvilleVector, QuantumModel

__all__ = [
    "TerminalMode",
    "PeriodicMode",
    "ProblemSpec",
    "SolverConfig",
    "ConvergenceRecord",
    "ExtremalSolution",
    "CostateFixedPoint",
    "resolve_bounds",
    "initial_policies",
    "adjoint_gradient",
    "solve_terminal",
    "solve_periodic",
    "periodic_state_fixed_point",
    "periodic_costate_fixed_point",
    "optimize_free_horizon",
    "theorem2_consistency_check",
    "Theorem2Report",
]


@dataclass(frozen=True)
class TerminalMode:
    """Fixed initial state, maximize <O|rho(T)> at fixed or free T."""

    rho0: LiouvilleVector
    horizon: float
    free_time: bool = False


@dataclass(frozen=True)
class PeriodicMode:
    """Quasistationary driving: maximize <O|rho*> over one period."""

    period: float
    free_period: bool = False


@dataclass(frozen=True)
class ProblemSpec:
    model: QuantumModel
    mode: TerminalMode | PeriodicMode
    objective: LiouvilleVector | None = None

    def __post_init__(self):
        if isinstance(self.mode, TerminalMode):
            if self.mode.horizon <= 0:
                raise ConfigError("terminal horizon must be positive")
            if abs(self.mode.rho0.trace() - 1.0) > 1e-9:
                raise ConfigError("initial state must have unit trace")
        elif isinstance(self.mode, PeriodicMode):
            if self.mode.period <= 0:
                raise ConfigError("period must be positive")
        else:
            raise ConfigError("mode must be TerminalMode or PeriodicMode")

    @property
    def observable(self) -> LiouvilleVector:
        return self.objective if self.objective is not None else self.model.observable

    @property
    def horizon(self) -> float:
        return self.mode.horizon if isinstance(self.mode, TerminalMode) else self.mode.period

    @property
    def free_horizon(self) -> bool:
        if isinstance(self.mode, TerminalMode):
            return self.mode.free_time
        return self.mode.free_period

    def with_horizon(self, horizon: float) -> "ProblemSpec":
        return replace(self, mode=replace(self.mode, **(
            {"horizon": horizon} if isinstance(self.mode, TerminalMode)
            else {"period": horizon}
        )))


@dataclass(frozen=True)
class SolverConfig:
    """grad_tol bounds the feasible-ascent stationarity residual measured in
    interval-average switching-function units (per unit time), which keeps
    its meaning fixed under grid refinement."""

    grid: int = 512
    max_iters: int = 500
    grad_tol: float = 1e-6
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 40
    n_starts: int = 8
    seed: int = 0
    unbounded_factor: float = 100.0
    horizon_rel_tol: float = 1e-6
    max_horizon_evals: int = 120

    def __post_init__(self):
        if self.grid < 1:
            raise ConfigError("grid must have at least one interval")
        if self.grad_tol <= 0 or self.max_iters < 0:
            raise ConfigError("invalid solver tolerances")


@dataclass
class ConvergenceRecord:
    converged: bool
    iterations: int
    residual: float
    objective_history: list[float] = field(default_factory=list)
    message: str = ""


@dataclass
class ExtremalSolution:
    policy: ControlPolicy
    trajectory: Trajectory
    diagnostics: DiagnosticsTrace
    objective: float
    record: ConvergenceRecord
    residuals: dict[str, float]
    mode: str
    horizon: float
    abnormal: bool = False


def resolve_bounds(model: QuantumModel, config: SolverConfig) -> np.ndarray:
    """Replace infinite channel bounds by +-U_big.

    U_big is chosen so the channel generator at the bound has norm
    unbounded_factor times the drift norm (paper-scale "unbounded" control).
    """
    bounds = model.bounds_array().copy()
    drift_norm = model.drift_scale()
    for k, ch in enumerate(model.controls):
        if np.isinf(bounds[k]).any():
            ch_norm = float(np.linalg.norm(ch.superop.matrix, 2))
            if ch_norm == 0.0:
                raise ConfigError(f"channel {k} has zero generator and infinite bounds")
            big = config.unbounded_factor * max(drift_norm, ch_norm) / ch_norm
            if np.isinf(bounds[k, 0]):
                bounds[k, 0] = -big
            if np.isinf(bounds[k, 1]):
                bounds[k, 1] = big
    return bounds


def initial_policies(model: QuantumModel, horizon: float, config: SolverConfig,
                     n_starts: int | None = None) -> list[ControlPolicy]:
    """Deterministic multi-start seeds: one clipped-zero start, then uniform."""
    bounds = resolve_bounds(model, config)
    n = config.n_starts if n_starts is None else n_starts
    h = horizon / config.grid
    rng = np.random.default_rng(config.seed)
    lo, hi = bounds[:, 0:1], bounds[:, 1:2]
    starts = [ControlPolicy(values=np.clip(np.zeros((model.n_controls, config.grid)),
                                           lo, hi), h=h, bounds=bounds)]
    for _ in range(max(0, n - 1)):
        vals = rng.uniform(lo, hi, size=(model.n_controls, config.grid))
        starts.append(ControlPolicy(values=vals, h=h, bounds=bounds))
    return starts


# ---------------------------------------------------------------------------
# Projected ascent core
# ---------------------------------------------------------------------------

def _projection_residual(values: np.ndarray, grad: np.ndarray,
                         bounds: np.ndarray) -> float:
    """Max feasible-ascent component of the gradient (the PMP violation)."""
    lo, hi = bounds[:, 0:1], bounds[:, 1:2]
    span = np.where(np.isfinite(hi - lo), hi - lo, 1.0)
    atol = 1e-12 + 1e-9 * span
    at_lo = values <= lo + atol
    at_hi = values >= hi - atol
    res = np.abs(grad).astype(float)
    res = np.where(at_hi, np.maximum(-grad, 0.0), res)
    res = np.where(at_lo & ~at_hi, np.maximum(grad, 0.0), res)
    res = np.where(at_lo & at_hi, 0.0, res)
    return float(res.max()) if res.size else 0.0


def _stationarity_residual(policy_h: float, values, grad, bounds) -> float:
    """Projection residual in interval-average switching-function units.

    Dividing the per-interval gradient (= h times the mean switching function)
    by h makes the convergence tolerance independent of the grid resolution,
    so warm-started refined grids keep optimizing instead of inheriting an
    h-shrunken residual.
    """
    return _projection_residual(values, grad, bounds) / policy_h


def _clip(values, bounds):
    return np.clip(values, bounds[:, 0:1], bounds[:, 1:2])


def _spg_ascent(evaluate, j_only, policy0: ControlPolicy, config: SolverConfig):
    """Spectral projected-gradient ascent on the policy values.

    evaluate(values) -> (J, grad, aux); j_only(values) -> J.
    Accepted steps never decrease J (Armijo with slack), so the objective
    history is monotone up to arithmetic noise.
    """
    bounds = policy0.bounds
    h = policy0.h
    u = _clip(policy0.values.copy(), bounds)
    j, grad, aux = evaluate(u)
    history = [j]
    span = np.where(np.isfinite(bounds[:, 1] - bounds[:, 0]),
                    bounds[:, 1] - bounds[:, 0], 1.0)
    gmax = float(np.abs(grad).max()) if grad.size else 0.0
    step = float(np.median(span)) / gmax if gmax > 0 else 1.0
    prev_u = prev_g = None
    residual = _stationarity_residual(h, u, grad, bounds)
    converged = residual < config.grad_tol
    message = "converged at start" if converged else ""
    iterations = 0

    for it in range(config.max_iters):
        if converged:
            break
        iterations = it + 1
        if prev_u is not None:
            s = u - prev_u
            y = grad - prev_g
            sy = float((s * y).sum())
            ss = float((s * s).sum())
            if sy < 0 and np.isfinite(sy) and ss > 0:
                step = -ss / sy
        accepted = False
        alpha = step
        for _ in range(config.max_backtracks):
            trial = _clip(u + alpha * grad, bounds)
            d = trial - u
            gd = float((grad * d).sum())
            if gd <= 0:
                break  # projection arc is exhausted in the ascent cone
            j_trial = j_only(trial)
            if j_trial >= j + config.armijo * gd:
                accepted = True
                break
            alpha *= config.shrink
        if not accepted:
            message = "line search stalled"
            break
        prev_u, prev_g = u, grad
        u = trial
        step = alpha
        j, grad, aux = evaluate(u)
        history.append(j)
        residual = _stationarity_residual(h, u, grad, bounds)
        if residual < config.grad_tol:
            converged = True
            message = "gradient projection below tolerance"
    record = ConvergenceRecord(converged=converged, iterations=iterations,
                               residual=residual, objective_history=history,
                               message=message)
    return policy0.with_values(u), j, grad, aux, record


# ---------------------------------------------------------------------------
# Terminal problem
# ---------------------------------------------------------------------------

def _normalized_terminal_costate(observable: np.ndarray, j: float,
                                 trace_vec: np.ndarray) -> np.ndarray:
    """<O_n| = <O| - <O|rho(T)> <1|; makes <psi|rho> vanish along the extremal."""
    return observable - j * trace_vec


def _is_abnormal(o_n: np.ndarray, observable: np.ndarray) -> bool:
    return float(np.linalg.norm(o_n)) < 1e-12 * max(1.0, float(np.linalg.norm(observable)))


class _TerminalEngine:
    def __init__(self, spec: ProblemSpec, policy_template: ControlPolicy):
        self.model = spec.model
        self.rho0 = spec.mode.rho0
        self.obs = spec.observable.coeffs
        self.trace_vec = spec.model.basis.trace_vector
        self.template = policy_template

    def policy(self, values):
        return self.template.with_values(values)

    def j_only(self, values) -> float:
        traj = propagate_state(self.model, self.policy(values), self.rho0)
        return float(self.obs @ traj.states[-1])

    def evaluate(self, values):
        policy = self.policy(values)
        traj = propagate_state(self.model, policy, self.rho0)
        j = float(self.obs @ traj.states[-1])
        o_n = _normalized_terminal_costate(self.obs, j, self.trace_vec)
        back = propagate_costate_backward(self.model, policy, o_n)
        grad = adjoint_interval_gradient(self.model, policy, traj.states,
                                         back.costates)
        aux = {"trajectory": traj.with_costates(back.costates), "o_n": o_n}
        return j, grad, aux


def adjoint_gradient(spec: ProblemSpec, policy: ControlPolicy) -> np.ndarray:
    """Exact per-interval gradient of J with respect to u[k][m]."""
    if isinstance(spec.mode, TerminalMode):
        engine = _TerminalEngine(spec, policy)
    else:
        engine = _PeriodicEngine(spec, policy)
    _, grad, _ = engine.evaluate(policy.values)
    return grad


def _common_residuals(model: QuantumModel, trajectory: Trajectory,
                      diagnostics: DiagnosticsTrace) -> dict[str, float]:
    pf = diagnostics.pf
    drift_part = np.einsum("mi,ij,mj->m", trajectory.costates,
                           model.drift.matrix, trajectory.states)
    scale = float(np.abs(drift_part).max())
    return {
        "normalization": trajectory.normalization_residual(),
        "pf_range": float(pf.max() - pf.min()),
        "pf_range_relative": float((pf.max() - pf.min()) / max(1.0, abs(pf[0]))),
        "pf_abs_max": float(np.abs(pf).max()),
        "pf_abs_median": float(np.median(np.abs(pf))),
        "drift_pf_scale": scale,
    }


def solve_terminal(spec: ProblemSpec, initial_policy: ControlPolicy,
                   config: SolverConfig | None = None) -> ExtremalSolution:
    """Projected adjoint-gradient ascent for the terminal Mayer problem."""
    if not isinstance(spec.mode, TerminalMode):
        raise ConfigError("solve_terminal requires a terminal-mode spec")
    config = config or SolverConfig()
    engine = _TerminalEngine(spec, initial_policy)

    j0 = engine.j_only(initial_policy.values)
    o_n0 = _normalized_terminal_costate(engine.obs, j0, engine.trace_vec)
    if _is_abnormal(o_n0, engine.obs):
        traj = propagate_state(spec.model, initial_policy, spec.mode.rho0)
        back = propagate_costate_backward(spec.model, initial_policy,
                                          np.zeros(spec.model.dim))
        traj = traj.with_costates(back.costates)
        diag = compute_diagnostics(spec.model, initial_policy, traj)
        record = ConvergenceRecord(converged=False, iterations=0, residual=np.nan,
                                   message="abnormal problem: costate vanishes")
        residuals = _common_residuals(spec.model, traj, diag)
        residuals["terminal_costate"] = 0.0
        return ExtremalSolution(policy=initial_policy, trajectory=traj,
                                diagnostics=diag, objective=j0, record=record,
                                residuals=residuals, mode="terminal",
                                horizon=spec.mode.horizon, abnormal=True)

    policy, j, grad, aux, record = _spg_ascent(engine.evaluate, engine.j_only,
                                               initial_policy, config)
    traj = aux["trajectory"]
    diag = compute_diagnostics(spec.model, policy, traj)
    residuals = _common_residuals(spec.model, traj, diag)
    residuals["terminal_costate"] = float(
        np.linalg.norm(traj.costates[-1] - aux["o_n"])
    )
    residuals["gradient_projection"] = record.residual
    return ExtremalSolution(policy=policy, trajectory=traj, diagnostics=diag,
                            objective=j, record=record, residuals=residuals,
                            mode="terminal", horizon=spec.mode.horizon)


# ---------------------------------------------------------------------------
# Periodic problem
# ---------------------------------------------------------------------------

def _state_fixed_point_raw(model: QuantumModel, prop: np.ndarray,
                           degeneracy_tol: float = 1e-8):
    eigvals, eigvecs = np.linalg.eig(prop)
    near_unit = np.abs(eigvals - 1.0) < degeneracy_tol
    if near_unit.sum() != 1:
        raise DegenerateSpectrumError(
            f"one-period propagator has {int(near_unit.sum())} eigenvalues within "
            f"{degeneracy_tol:.1g} of unity; quasistationary state is not unique"
        )
    idx = int(np.argmin(np.abs(eigvals - 1.0)))
    vec = eigvecs[:, idx].real
    tr = float(model.basis.trace_vector @ vec)
    if abs(tr) < 1e-12:
        raise DegenerateSpectrumError("unit eigenvector carries no trace component")
    rho = vec / tr
    residual = float(np.linalg.norm(prop @ rho - rho))
    if residual > 1e-10:
        raise NumericalRankError(
            f"fixed-point residual {residual:.3g} exceeds 1e-10"
        )
    return rho, eigvals


def periodic_state_fixed_point(model: QuantumModel,
                               policy: ControlPolicy) -> LiouvilleVector:
    """Unique trace-one fixed vector of the one-period propagator."""
    prop = one_period_propagator(model, policy)
    rho, _ = _state_fixed_point_raw(model, prop)
    return LiouvilleVector(coeffs=rho, basis=model.basis)


@dataclass(frozen=True)
class CostateFixedPoint:
    psi: LiouvilleVector
    abnormal: bool
    residual: float


def _costate_fixed_point_raw(model: QuantumModel, prop: np.ndarray,
                             o_n: np.ndarray, rho_star: np.ndarray):
    if float(np.linalg.norm(o_n)) < 1e-14:
        return np.zeros_like(o_n), True, 0.0
    psi, *_ = np.linalg.lstsq(prop.T - np.eye(prop.shape[0]), -o_n, rcond=None)
    # the left unit eigenvector <1| spans the lstsq null direction; fix the
    # free component with the normalization <psi|rho*> = 0
    tvec = model.basis.trace_vector
    psi = psi - (float(psi @ rho_star) / float(tvec @ rho_star)) * tvec
    residual = float(np.linalg.norm((prop.T - np.eye(prop.shape[0])) @ psi + o_n))
    if residual > 1e-8 * max(1.0, float(np.linalg.norm(o_n))):
        raise NumericalRankError(
            f"periodic costate system residual {residual:.3g} beyond deflation"
        )
    return psi, False, residual


def periodic_costate_fixed_point(model: QuantumModel, policy: ControlPolicy,
                                 o_n: LiouvilleVector | np.ndarray,
                                 rho_star: LiouvilleVector | None = None
                                 ) -> CostateFixedPoint:
    """Solve <psi(T)| (Prop - I) = -<O_n| with <psi|rho*> = 0."""
    prop = one_period_propagator(model, policy)
    if rho_star is None:
        rho, _ = _state_fixed_point_raw(model, prop)
    else:
        rho = rho_star.coeffs
    vec = o_n.coeffs if isinstance(o_n, LiouvilleVector) else np.asarray(o_n, float)
    psi, abnormal, residual = _costate_fixed_point_raw(model, prop, vec, rho)
    return CostateFixedPoint(psi=LiouvilleVector(coeffs=psi, basis=model.basis),
                             abnormal=abnormal, residual=residual)


class _PeriodicEngine:
    def __init__(self, spec: ProblemSpec, policy_template: ControlPolicy):
        self.model = spec.model
        self.obs = spec.observable.coeffs
        self.trace_vec = spec.model.basis.trace_vector
        self.template = policy_template

    def policy(self, values):
        return self.template.with_values(values)

    def _fixed_point(self, policy):
        prop = one_period_propagator(self.model, policy)
        rho, eigvals = _state_fixed_point_raw(self.model, prop)
        return prop, rho, eigvals

    def j_only(self, values) -> float:
        _, rho, _ = self._fixed_point(self.policy(values))
        return float(self.obs @ rho)

    def evaluate(self, values):
        policy = self.policy(values)
        prop, rho_star, eigvals = self._fixed_point(policy)
        j = float(self.obs @ rho_star)
        o_n = _normalized_terminal_costate(self.obs, j, self.trace_vec)
        psi_T, abnormal, cres = _costate_fixed_point_raw(self.model, prop, o_n,
                                                         rho_star)
        traj = propagate_state(self.model, policy,
                               LiouvilleVector(coeffs=rho_star, basis=self.model.basis))
        back = propagate_costate_backward(self.model, policy, psi_T)
        grad = adjoint_interval_gradient(self.model, policy, traj.states,
                                         back.costates)
        aux = {
            "trajectory": traj.with_costates(back.costates),
            "o_n": o_n,
            "psi_T": psi_T,
            "prop": prop,
            "eigvals": eigvals,
            "abnormal": abnormal,
            "costate_residual": cres,
        }
        return j, grad, aux


def solve_periodic(spec: ProblemSpec, initial_policy: ControlPolicy,
                   config: SolverConfig | None = None) -> ExtremalSolution:
    """Alternating quasistationary state / costate / policy ascent."""
    if not isinstance(spec.mode, PeriodicMode):
        raise ConfigError("solve_periodic requires a periodic-mode spec")
    config = config or SolverConfig()
    engine = _PeriodicEngine(spec, initial_policy)

    j0, grad0, aux0 = engine.evaluate(initial_policy.values)
    if aux0["abnormal"]:
        traj = aux0["trajectory"]
        diag = compute_diagnostics(spec.model, initial_policy, traj)
        record = ConvergenceRecord(converged=False, iterations=0, residual=np.nan,
                                   message="abnormal problem: costate vanishes")
        residuals = _common_residuals(spec.model, traj, diag)
        return ExtremalSolution(policy=initial_policy, trajectory=traj,
                                diagnostics=diag, objective=j0, record=record,
                                residuals=residuals, mode="periodic",
                                horizon=spec.mode.period, abnormal=True)

    policy, j, grad, aux, record = _spg_ascent(engine.evaluate, engine.j_only,
                                               initial_policy, config)
    traj = aux["trajectory"]
    diag = compute_diagnostics(spec.model, policy, traj)
    residuals = _common_residuals(spec.model, traj, diag)
    residuals["state_periodicity"] = float(
        np.linalg.norm(traj.states[-1] - traj.states[0])
    )
    psi0 = traj.costates[0]
    psi_T = traj.costates[-1]
    residuals["costate_periodicity"] = float(
        np.linalg.norm(psi0 - (psi_T - aux["o_n"]))
    )
    residuals["costate_system"] = aux["costate_residual"]
    residuals["gradient_projection"] = record.residual
    eigvals = np.sort(np.abs(aux["eigvals"]))[::-1]
    residuals["second_eigenvalue_abs"] = float(eigvals[1]) if len(eigvals) > 1 else 0.0
    return ExtremalSolution(policy=policy, trajectory=traj, diagnostics=diag,
                            objective=j, record=record, residuals=residuals,
                            mode="periodic", horizon=spec.mode.period)


# ---------------------------------------------------------------------------
# Free horizon
# ---------------------------------------------------------------------------

def optimize_free_horizon(spec: ProblemSpec, initial_policy: ControlPolicy,
                          config: SolverConfig, bracket: tuple[float, float]
                          ) -> ExtremalSolution:
    """Golden-section search over the horizon wrapping the inner solver.

    The inner solve at each trial horizon is warm-started from the best policy
    found so far (the grid size is fixed, so policy values transfer across
    horizons unchanged).  Raises BracketSearchError when the scan is flat or
    the optimum sticks to a bracket endpoint.
    """
    if not spec.free_horizon:
        raise ConfigError("spec does not declare a free horizon")
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0 < lo < hi):
        raise ConfigError(f"invalid horizon bracket ({lo}, {hi})")
    solve = solve_terminal if isinstance(spec.mode, TerminalMode) else solve_periodic
    best = {"values": initial_policy.values, "J": -np.inf, "solution": None, "T": None}
    evals: dict[float, float] = {}

    def inner(horizon: float) -> float:
        if horizon in evals:
            return evals[horizon]
        sub = spec.with_horizon(horizon)
        policy = ControlPolicy(values=best["values"], h=horizon / initial_policy.n_intervals,
                               bounds=initial_policy.bounds)
        sol = solve(sub, policy, config)
        evals[horizon] = sol.objective
        if sol.objective > best["J"]:
            best.update(values=sol.policy.values, J=sol.objective,
                        solution=sol, T=horizon)
        return sol.objective

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    xatol = config.horizon_rel_tol * max(1.0, hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = inner(c), inner(d)
    n_evals = 2
    while (b - a) > xatol and n_evals < config.max_horizon_evals:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = inner(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = inner(d)
        n_evals += 1

    js = np.array(list(evals.values()))
    if js.size and (js.max() - js.min()) <= 1e-12 * max(1.0, abs(js.max())):
        raise BracketSearchError(
            f"flat objective over horizon bracket [{lo}, {hi}]: "
            f"J({lo:.6g})..J({hi:.6g}) all equal {js.max():.12g}"
        )
    t_star = 0.5 * (a + b)
    inner(t_star)
    edge = max(2 * xatol, 1e-3 * (hi - lo))
    if best["T"] - lo < edge or hi - best["T"] < edge:
        j_lo, j_hi = inner(lo), inner(hi)
        raise BracketSearchError(
            f"no interior optimum: best horizon {best['T']:.6g} sits at the "
            f"bracket edge; endpoint values J({lo:.6g}) = {j_lo:.6g}, "
            f"J({hi:.6g}) = {j_hi:.6g}"
        )
    return best["solution"]


# ---------------------------------------------------------------------------
# Periodic global-optimality (trap) check
# ---------------------------------------------------------------------------

@dataclass
class Theorem2Report:
    n: int
    horizon: float
    violation: float
    gradient_scale: float
    relative_violation: float
    improvable: bool
    contracting_norms: list[float]
    second_eigenvalue_abs: float


def theorem2_consistency_check(spec: ProblemSpec, solution: ExtremalSolution,
                               n: int = 2) -> Theorem2Report:
    """Test the converged periodic extremal against the nT terminal problem.

    Builds the terminal problem over horizon n*T with the quasistationary
    initial state and the n-fold repeated policy, and reports the maximal
    feasible-ascent component of its gradient.  A strictly positive value
    means the periodic solution is only locally optimal (improvable by period
    doubling).  Also reports the geometric decay of the costate component on
    the contracting subspace.
    """
    if n < 2:
        raise ValueError(f"repetition count must be >= 2, got {n}")
    if solution.mode != "periodic":
        raise ConfigError("theorem 2 check needs a periodic solution")
    model = spec.model
    policy_n = solution.policy.repeated(n)
    rho0 = LiouvilleVector(coeffs=solution.trajectory.states[0], basis=model.basis)
    term_spec = ProblemSpec(model=model, objective=spec.observable,
                            mode=TerminalMode(rho0=rho0,
                                              horizon=n * solution.policy.duration))
    grad = adjoint_gradient(term_spec, policy_n)
    violation = _projection_residual(policy_n.values, grad, policy_n.bounds)
    scale = float(np.abs(grad).max()) if grad.size else 0.0

    prop = one_period_propagator(model, solution.policy)
    eigvals = np.linalg.eigvals(prop)
    second = float(np.sort(np.abs(eigvals))[-2]) if len(eigvals) > 1 else 0.0
    j = float(spec.observable.coeffs @ solution.trajectory.states[-1])
    o_n = _normalized_terminal_costate(spec.observable.coeffs, j,
                                       model.basis.trace_vector)
    norms = []
    vec = o_n.copy()
    for _ in range(max(n, 6) + 1):
        norms.append(float(np.linalg.norm(vec)))
        vec = prop.T @ vec
    return Theorem2Report(
        n=n,
        horizon=n * solution.policy.duration,
        violation=violation,
        gradient_scale=scale,
        relative_violation=violation / max(scale, 1e-300),
        improvable=violation > 1e-10 * max(scale, 1.0),
        contracting_norms=norms,
        second_eigenvalue_abs=second,
    )
