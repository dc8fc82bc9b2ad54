"""Arc structure of converged extremals: labeling, corners, counting.

Intervals are labeled regular (pinned at a bound with the matching
switching-function sign) or singular (switching function below a relative
tolerance over a sustained run); junctions between segments are typed and
checked against the corner (Weierstrass-Erdmann) conditions, and the
parameter/constraint bookkeeping decides whether a proposed structure is
resolvable (regular-terminated, branch-free structures exactly balance).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import pontryagin_function, switching_derivatives
from .liouville import QuantumModel

__all__ = [
    "REGULAR_MAX",
    "REGULAR_MIN",
    "SINGULAR",
    "AMBIGUOUS",
    "ArcTolerances",
    "ArcSegment",
    "Junction",
    "ArcSegmentation",
    "classify_arcs",
    "CornerReport",
    "verify_corner_conditions",
    "StructureCount",
    "count_parameters_constraints",
    "SmoothnessReport",
    "smoothness_probe",
    "SpikeFeature",
    "detect_spikes",
    "StructureReport",
    "theorem1_structure_report",
]

REGULAR_MAX = "regular_max"
REGULAR_MIN = "regular_min"
SINGULAR = "singular"
AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class ArcTolerances:
    """Defaults separate grid chatter from genuine singular runs at M ~ 512.

    eps_ku_abs adds an absolute switching-function tolerance; set it to a few
    times the solver's stationarity tolerance when classifying extremals whose
    every interval is singular (the relative test is self-referential there).
    """

    eps_u_rel: float = 1e-6    # |u - bound| < eps_u_rel * (u_max - u_min)
    eps_ku_rel: float = 1e-5   # |K_u| < eps_ku_rel * max_t |K_u|
    eps_ku_abs: float = 0.0
    min_singular_run: int = 3
    branch_tol: float = 1e-10


@dataclass(frozen=True)
class ArcSegment:
    channel: int
    start_index: int   # first interval
    end_index: int     # one past the last interval
    start_time: float
    end_time: float
    label: str

    @property
    def n_intervals(self) -> int:
        return self.end_index - self.start_index


@dataclass(frozen=True)
class Junction:
    channel: int
    index: int        # node index between intervals index-1 and index
    time: float
    kind: str         # "corner" | "regular_to_singular" | "singular_to_regular"
                      # | "branch" | "ambiguous"
    branch_order: str | None = None  # "1" | "2" | ">=3"


@dataclass
class ArcSegmentation:
    channel: int
    segments: list[ArcSegment]
    junctions: list[Junction]
    ambiguous_intervals: list[int]

    def labels_per_interval(self) -> list[str]:
        out = []
        for seg in self.segments:
            out.extend([seg.label] * seg.n_intervals)
        return out

    @property
    def first_label(self) -> str:
        return self.segments[0].label

    @property
    def last_label(self) -> str:
        return self.segments[-1].label


def _interval_switching_means(diagnostics, channel: int) -> np.ndarray:
    sw = diagnostics.switching[channel]
    return 0.5 * (sw[:-1] + sw[1:])


def _interval_labels(values, bounds, ku_mean, tol: ArcTolerances,
                     ku_floor: float = 0.0) -> np.ndarray:
    lo, hi = bounds
    span = hi - lo if np.isfinite(hi - lo) and hi > lo else max(abs(lo), abs(hi), 1.0)
    eps_u = tol.eps_u_rel * span
    ku_scale = float(np.abs(ku_mean).max())
    # a switching trace at round-off level is an identically zero K_u channel
    if ku_scale > 0:
        eps_ku = max(tol.eps_ku_rel * ku_scale, tol.eps_ku_abs, ku_floor)
    else:
        eps_ku = np.inf

    labels = np.array([AMBIGUOUS] * len(values), dtype=object)
    at_hi = np.isfinite(hi) & (np.abs(values - hi) < eps_u)
    at_lo = np.isfinite(lo) & (np.abs(values - lo) < eps_u)
    labels[at_hi & (ku_mean > -eps_ku)] = REGULAR_MAX
    labels[at_lo & (ku_mean < eps_ku) & (labels == AMBIGUOUS)] = REGULAR_MIN

    small = np.abs(ku_mean) < eps_ku
    m = 0
    while m < len(values):
        if small[m] and labels[m] == AMBIGUOUS:
            run = m
            while run < len(values) and small[run] and labels[run] == AMBIGUOUS:
                run += 1
            if run - m >= tol.min_singular_run:
                labels[m:run] = SINGULAR
            m = run
        else:
            m += 1
    return labels


def _branch_order_label(psi, rho, model: QuantumModel, channel: int, u,
                        tol: float) -> str:
    """Estimate the branch order via the nested-commutator chain, capped at 2."""
    lk = model.controls[channel].superop.matrix
    lc = model.drift.matrix.copy()
    for l, ch in enumerate(model.controls):
        if l != channel:
            lc = lc + u[l] * ch.superop.matrix
    norm_psi = np.linalg.norm(psi)
    norm_rho = np.linalg.norm(rho)

    def comm(a, b):
        return a @ b - b @ a

    # X_m(alpha) = ad_{L_c + alpha L_k}^m [L_k, L_c], stored by power of alpha
    polys = {0: [comm(lk, lc)]}
    for m in range(1, 4):
        prev = polys[m - 1]
        cur = []
        for p in range(len(prev) + 1):
            term = np.zeros_like(lk)
            if p < len(prev):
                term = term + comm(lc, prev[p])
            if p >= 1:
                term = term + comm(lk, prev[p - 1])
            cur.append(term)
        polys[m] = cur

    def conditions_hold(s: int) -> bool:
        for m in range(1, s + 1):
            for l, mat in enumerate(polys[m]):
                scale = np.linalg.norm(mat, 2) * norm_psi * norm_rho
                if scale == 0.0:
                    continue
                if abs(psi @ (mat @ rho)) > tol * scale:
                    return False
        return True

    if conditions_hold(3):
        return ">=3"
    if conditions_hold(2):
        return "2"
    return "1"


def classify_arcs(solution, model: QuantumModel,
                  tolerances: ArcTolerances | None = None) -> list[ArcSegmentation]:
    """Label every interval of every channel and locate the junctions."""
    tol = tolerances or ArcTolerances()
    policy = solution.policy
    diag = solution.diagnostics
    states = solution.trajectory.states
    costates = solution.trajectory.costates
    times = policy.times
    node_u = np.concatenate([policy.values, policy.values[:, -1:]], axis=1)

    state_scale = float(np.linalg.norm(states, axis=1).max())
    costate_scale = float(np.linalg.norm(costates, axis=1).max())
    out = []
    for k in range(policy.n_channels):
        ku_mean = _interval_switching_means(diag, k)
        ch_norm = float(np.linalg.norm(model.controls[k].superop.matrix, 2))
        floor = 1e-12 * ch_norm * state_scale * costate_scale
        labels = _interval_labels(policy.values[k], policy.bounds[k], ku_mean, tol,
                                  ku_floor=floor)

        segments = []
        start = 0
        for m in range(1, policy.n_intervals + 1):
            if m == policy.n_intervals or labels[m] != labels[start]:
                segments.append(ArcSegment(
                    channel=k, start_index=start, end_index=m,
                    start_time=float(times[start]), end_time=float(times[m]),
                    label=str(labels[start]),
                ))
                start = m

        junctions = []
        for i in range(1, len(segments)):
            left, right = segments[i - 1], segments[i]
            node = right.start_index
            pair = {left.label, right.label}
            if AMBIGUOUS in pair:
                kind = "ambiguous"
                order = None
            elif pair <= {REGULAR_MAX, REGULAR_MIN}:
                kind = "corner"
                order = None
            else:
                kind = ("regular_to_singular" if right.label == SINGULAR
                        else "singular_to_regular")
                # branch point: the continuation denominator bracket vanishes
                _, (_a_chk, b_chk) = switching_derivatives(
                    costates[node], states[node], model, k, node_u[:, node])
                lk = model.controls[k].superop.matrix
                lc = model.drift.matrix
                scale = (np.linalg.norm(lk, 2) ** 2 * np.linalg.norm(lc, 2)
                         * np.linalg.norm(costates[node]) * np.linalg.norm(states[node]))
                if abs(b_chk) <= tol.branch_tol * max(scale, 1e-300):
                    kind = "branch"
                    order = _branch_order_label(costates[node], states[node],
                                                model, k, node_u[:, node],
                                                tol.branch_tol)
                else:
                    order = None
            junctions.append(Junction(channel=k, index=node,
                                      time=float(times[node]), kind=kind,
                                      branch_order=order))

        ambiguous = [m for m in range(policy.n_intervals) if labels[m] == AMBIGUOUS]
        out.append(ArcSegmentation(channel=k, segments=segments,
                                   junctions=junctions,
                                   ambiguous_intervals=ambiguous))
    return out


@dataclass(frozen=True)
class CornerReport:
    junction: Junction
    pf_jump: float
    costate_jump: float
    switching_abs: float
    switching_rate_abs: float | None


def verify_corner_conditions(solution, model: QuantumModel,
                             segmentations: list[ArcSegmentation]
                             ) -> list[CornerReport]:
    """Weierstrass-Erdmann residuals at every junction (pure report)."""
    policy = solution.policy
    states = solution.trajectory.states
    costates = solution.trajectory.costates
    reports = []
    for seg in segmentations:
        k = seg.channel
        for junc in seg.junctions:
            i = junc.index
            u_left = policy.values[:, i - 1]
            u_right = policy.values[:, min(i, policy.n_intervals - 1)]
            pf_left = pontryagin_function(costates[i], states[i], model, u_left)
            pf_right = pontryagin_function(costates[i], states[i], model, u_right)
            sw = float(costates[i] @ (model.controls[k].superop.matrix @ states[i]))
            rate = None
            if junc.kind in ("regular_to_singular", "branch"):
                rate, _ = switching_derivatives(costates[i], states[i], model, k,
                                                u_right)
                rate = abs(rate)
            reports.append(CornerReport(
                junction=junc,
                pf_jump=abs(pf_left - pf_right),
                costate_jump=0.0,  # single stored node value; continuity by construction
                switching_abs=abs(sw),
                switching_rate_abs=rate,
            ))
    return reports


@dataclass(frozen=True)
class StructureCount:
    p_total: int
    c_total: int
    deficit: int
    resolvable: bool
    requires_redundancy: bool


def count_parameters_constraints(dimension: int, n_junctions: int,
                                 branch_orders=(), n_singular_links: int = 0,
                                 free_horizon: bool = False,
                                 n_singular_terminal_arcs: int = 0) -> StructureCount:
    """Unknown-parameter vs equality-constraint bookkeeping for a structure.

    P = N_spec + 2 N^2 + P_branch + alpha and
    C = 2 N^2 + alpha + N_spec - N_sing + C_branch + beta, with the branch
    contributions at their extremal bounds sum(s_k - 1) and
    sum((s_k + 1)(s_k + 2)/2 - 1).
    """
    branch_orders = tuple(int(s) for s in branch_orders)
    if dimension < 2 or n_junctions < 0 or n_singular_links < 0:
        raise ValueError("negative or degenerate structure counts")
    if any(s < 1 for s in branch_orders):
        raise ValueError("branch orders must be >= 1")
    if n_singular_links > len(branch_orders):
        raise ValueError("singular links cannot exceed branch points")
    if len(branch_orders) > n_junctions:
        raise ValueError("branch points cannot exceed junctions")
    if not 0 <= n_singular_terminal_arcs <= 2:
        raise ValueError("terminal singular arc count must be 0, 1 or 2")
    alpha = 1 if free_horizon else 0
    p_branch = sum(s - 1 for s in branch_orders)
    c_branch = sum((s + 1) * (s + 2) // 2 - 1 for s in branch_orders)
    n2 = 2 * dimension ** 2
    p_total = n_junctions + n2 + p_branch + alpha
    c_total = (n2 + alpha + n_junctions - n_singular_links + c_branch
               + n_singular_terminal_arcs)
    deficit = p_total - c_total
    return StructureCount(p_total=p_total, c_total=c_total, deficit=deficit,
                          resolvable=deficit >= 0,
                          requires_redundancy=deficit < 0)


@dataclass(frozen=True)
class SmoothnessReport:
    insufficient_resolution: bool
    jumps: dict[int, float]
    normalized: dict[int, float]
    scale: float


def smoothness_probe(solution, segment: ArcSegment, max_order: int = 3,
                     min_intervals: int = 8) -> SmoothnessReport:
    """Finite-difference smoothness proxy for a singular segment.

    Reports the largest r-th order difference of the control sequence inside
    the segment (raw, so an injected step of size d shows up as d at order 1)
    and the same normalized by the segment's value scale.
    """
    values = solution.policy.values[segment.channel,
                                    segment.start_index:segment.end_index]
    if len(values) < min_intervals:
        return SmoothnessReport(insufficient_resolution=True, jumps={},
                                normalized={}, scale=0.0)
    scale = max(float(np.ptp(values)), abs(float(np.mean(values))), 1e-300)
    jumps = {}
    for r in range(1, max_order + 1):
        d = np.diff(values, r)
        jumps[r] = float(np.abs(d).max()) if d.size else 0.0
    normalized = {r: v / scale for r, v in jumps.items()}
    return SmoothnessReport(insufficient_resolution=False, jumps=jumps,
                            normalized=normalized, scale=scale)


@dataclass(frozen=True)
class SpikeFeature:
    """One near-delta excursion of a control: window and excess area."""

    channel: int
    start_index: int
    end_index: int
    start_time: float
    end_time: float
    area: float        # integral of (u - local baseline) over the window
    peak_excess: float


def detect_spikes(policy, channel: int = 0, threshold_rel: float = 0.3,
                  mad_floor: float = 8.0, merge_cells: int | None = None
                  ) -> list[SpikeFeature]:
    """Locate localized excursions of a control riding on a smooth background.

    The background is a rolling median; cells whose residual exceeds
    threshold_rel times the peak residual are spike cells, nearby runs are
    merged, and the reported area is the integral of the residual over the
    merged window.  Policies whose residual never rises above mad_floor
    median absolute deviations are treated as spike-free.
    """
    u = np.asarray(policy.values[channel], dtype=float)
    m = len(u)
    window = max(5, m // 8) | 1
    pad = window // 2
    padded = np.pad(u, pad, mode="wrap")
    baseline = np.array([np.median(padded[i:i + window]) for i in range(m)])
    resid = u - baseline
    mad = np.median(np.abs(resid - np.median(resid))) + 1e-300
    peak = float(np.abs(resid).max())
    if peak < mad_floor * mad:
        return []
    mask = np.abs(resid) > threshold_rel * peak
    # merge ringing within 5% of the horizon; distinct spikes sit much farther
    gap = merge_cells if merge_cells is not None else max(2, m // 20)
    idx = np.flatnonzero(mask)
    runs = []
    start = prev = idx[0]
    for i in idx[1:]:
        if i - prev > gap:
            runs.append((start, prev + 1))
            start = i
        prev = i
    runs.append((start, prev + 1))
    times = policy.times
    out = []
    for lo, hi in runs:
        lo_ext = max(0, lo - gap)
        hi_ext = min(m, hi + gap)
        area = float(resid[lo_ext:hi_ext].sum() * policy.h)
        out.append(SpikeFeature(
            channel=channel, start_index=lo_ext, end_index=hi_ext,
            start_time=float(times[lo_ext]), end_time=float(times[hi_ext]),
            area=area, peak_excess=float(np.abs(resid[lo:hi]).max()),
        ))
    return out


@dataclass
class StructureReport:
    verdict: str  # "CONSISTENT" | "DEGENERATE" | "INCONSISTENT"
    first_labels: list[str]
    last_labels: list[str]
    n_junctions: int
    branch_orders: list[str]
    n_singular_links: int
    n_singular_terminal_arcs: int
    free_horizon: bool
    count: StructureCount
    pf_range_relative: float
    max_corner_pf_jump: float
    degeneracy_max: float | None
    notes: list[str] = field(default_factory=list)


def theorem1_structure_report(solution, model: QuantumModel,
                              tolerances: ArcTolerances | None = None,
                              free_horizon: bool = False,
                              degeneracy_rtol: float = 1e-6,
                              objective=None) -> StructureReport:
    """Arc-structure verdict: regular-terminated, degenerate, or inconsistent.

    Degeneracy covers the known exceptions: closed-system kinematic critical
    points ([rho(t), O~(t)] identically zero), vanishing Pontryagin function
    with a singular first arc (thermalized start past the optimal horizon),
    and built-in objective/control redundancies (<O| L_k = 0).
    """
    segs = classify_arcs(solution, model, tolerances)
    corners = verify_corner_conditions(solution, model, segs)
    notes = []

    degeneracy_max = None
    degenerate = False
    if solution.diagnostics.degeneracy is not None:
        degeneracy_max = float(solution.diagnostics.degeneracy.max())
        obs_scale = float(np.linalg.norm(solution.trajectory.costates[-1]))
        if degeneracy_max < degeneracy_rtol * max(obs_scale, 1e-300):
            degenerate = True
            notes.append("kinematic critical point: [rho(t), O~(t)] = 0 along "
                         "the extremal")
    # the terminal costate is O up to a <1| shift every channel annihilates,
    # so it stands in for the objective on terminal runs; periodic costates
    # do not, so callers there should pass the objective explicitly
    obs = solution.trajectory.costates[-1] if objective is None else np.asarray(
        getattr(objective, "coeffs", objective), dtype=float)
    for k, ch in enumerate(model.controls):
        lk_norm = np.linalg.norm(ch.superop.matrix, 2)
        red = np.linalg.norm(obs @ ch.superop.matrix)
        if lk_norm > 0 and red < 1e-10 * lk_norm * max(np.linalg.norm(obs), 1e-300):
            degenerate = True
            notes.append(f"objective/control redundancy on channel {k}: <O| L_k = 0")

    first = [s.first_label for s in segs]
    last = [s.last_label for s in segs]
    regular_ends = all(l in (REGULAR_MAX, REGULAR_MIN) for l in first + last)

    pf_scale = max(1.0, abs(float(solution.diagnostics.pf[0])))
    pf_small = solution.residuals.get("pf_abs_max", np.inf) < 1e-6 * max(
        solution.residuals.get("drift_pf_scale", 1.0), 1e-300)
    if not regular_ends and pf_small:
        degenerate = True
        notes.append("vanishing Pontryagin function with a singular terminal "
                     "arc (free-horizon-type boundary redundancy)")

    beta = sum(1 for l in (first[0], last[0]) if l == SINGULAR) if segs else 0
    seg0 = segs[0]
    branch = [j.branch_order for j in seg0.junctions if j.kind == "branch"]
    n_sing_links = sum(1 for j in seg0.junctions if j.kind == "branch")
    count = count_parameters_constraints(
        dimension=model.basis.dimension,
        n_junctions=len(seg0.junctions),
        branch_orders=[min(int(o.lstrip(">=")), 3) for o in branch],
        n_singular_links=n_sing_links,
        free_horizon=free_horizon,
        n_singular_terminal_arcs=beta,
    )
    if degenerate:
        verdict = "DEGENERATE"
    elif regular_ends:
        verdict = "CONSISTENT"
    else:
        verdict = "INCONSISTENT"
    return StructureReport(
        verdict=verdict,
        first_labels=first,
        last_labels=last,
        n_junctions=len(seg0.junctions),
        branch_orders=[o for o in branch],
        n_singular_links=n_sing_links,
        n_singular_terminal_arcs=beta,
        free_horizon=free_horizon,
        count=count,
        pf_range_relative=float(solution.diagnostics.pf_range() / pf_scale),
        max_corner_pf_jump=max((c.pf_jump for c in corners), default=0.0),
        degeneracy_max=degeneracy_max,
        notes=notes,
    )
