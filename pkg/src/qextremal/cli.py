"""Command-line surface: configuration ingestion, runs, and file emission.

Subcommands: solve-terminal, solve-periodic, classify, verify, qre-bangbang.
Configs are JSON (schema documented in the README); every emitted file starts
with a schema-version line.  Exit codes: 0 success (at least one converged
start for solves), 1 configuration error, 2 numerical failure or no
convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import arcs as arcs_mod
from . import qre as qre_mod
from .dynamics import ControlPolicy, compute_diagnostics
from .errors import ConfigError, QExtremalError
from .liouville import LiouvilleVector, QuantumModel, vectorize
from .models import build_model
from .solver import (
    PeriodicMode,
    ProblemSpec,
    SolverConfig,
    TerminalMode,
    initial_policies,
    optimize_free_horizon,
    resolve_bounds,
    solve_periodic,
    solve_terminal,
    theorem2_consistency_check,
)

TRAJECTORY_SCHEMA = "qextremal.trajectory.v1"
REPORT_SCHEMA = "qextremal.report.v1"
SOLUTION_SCHEMA = "qextremal.solution.v1"


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno} "
            f"(offset {exc.pos}): {exc.msg}"
        ) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _as_complex_matrix(entry) -> np.ndarray:
    if isinstance(entry, dict):
        real = np.asarray(entry.get("real", entry.get("re")), dtype=float)
        imag = entry.get("imag", entry.get("im"))
        mat = real + 1j * (np.asarray(imag, dtype=float) if imag is not None else 0.0)
        return mat
    return np.asarray(entry, dtype=float).astype(complex)


def _initial_state(model: QuantumModel, spec_entry) -> LiouvilleVector:
    n = model.basis.dimension
    if isinstance(spec_entry, str):
        if spec_entry == "ground":
            mat = np.zeros((n, n), dtype=complex)
            mat[0, 0] = 1.0
        elif spec_entry == "excited":
            mat = np.zeros((n, n), dtype=complex)
            mat[n - 1, n - 1] = 1.0
        elif spec_entry == "maximally-mixed":
            mat = np.eye(n, dtype=complex) / n
        else:
            raise ConfigError(f"unknown initial state '{spec_entry}'")
    else:
        mat = _as_complex_matrix(spec_entry)
    return vectorize(mat, model.basis)


def _apply_bounds_override(model: QuantumModel, bounds_entry) -> QuantumModel:
    from dataclasses import replace

    if bounds_entry is None:
        return model
    bounds = np.asarray(bounds_entry, dtype=float)
    if bounds.shape != (model.n_controls, 2):
        raise ConfigError(
            f"bounds override must be {model.n_controls} [lower, upper] pairs"
        )
    channels = []
    for k, ch in enumerate(model.controls):
        lo, hi = float(bounds[k, 0]), float(bounds[k, 1])
        if lo > hi:
            label = ch.label or f"u{k + 1}"
            raise ConfigError(
                f"channel {k} ('{label}'): lower bound {lo} exceeds upper bound {hi}"
            )
        channels.append(replace(ch, lower=lo, upper=hi))
    return replace(model, controls=tuple(channels))


def build_problem(cfg: dict, overrides: argparse.Namespace | None = None):
    """Config + CLI overrides -> (ProblemSpec, SolverConfig, run metadata)."""
    try:
        model_entry = cfg["model"]
        model = build_model(model_entry["name"], model_entry.get("params"))
    except KeyError as exc:
        raise ConfigError(f"config is missing key {exc}") from exc
    model = _apply_bounds_override(model, cfg.get("bounds"))

    problem = cfg.get("problem", {})
    mode_name = problem.get("mode")
    if mode_name not in ("terminal", "periodic"):
        raise ConfigError("problem.mode must be 'terminal' or 'periodic'")
    horizon = problem.get("horizon")
    if horizon is None or horizon <= 0:
        raise ConfigError("problem.horizon must be a positive number")
    objective = None
    if "objective" in problem:
        objective = vectorize(_as_complex_matrix(problem["objective"]), model.basis)
    if mode_name == "terminal":
        rho0 = _initial_state(model, problem.get("initial_state", "ground"))
        mode = TerminalMode(rho0=rho0, horizon=float(horizon),
                            free_time=bool(problem.get("free_horizon", False)))
    else:
        mode = PeriodicMode(period=float(horizon),
                            free_period=bool(problem.get("free_horizon", False)))
    spec = ProblemSpec(model=model, mode=mode, objective=objective)

    solver_entry = dict(cfg.get("solver", {}))
    grid = cfg.get("grid", solver_entry.pop("grid", 512))
    starts = cfg.get("starts", solver_entry.pop("n_starts", 8))
    seed = cfg.get("seed", solver_entry.pop("seed", 0))
    if overrides is not None:
        grid = overrides.grid if getattr(overrides, "grid", None) else grid
        starts = overrides.starts if getattr(overrides, "starts", None) else starts
        if getattr(overrides, "seed", None) is not None:
            seed = overrides.seed
    try:
        config = SolverConfig(grid=int(grid), n_starts=int(starts), seed=int(seed),
                              **solver_entry)
    except TypeError as exc:
        raise ConfigError(f"unknown solver option: {exc}") from exc
    meta = {
        "bracket": problem.get("bracket"),
        "config_echo": cfg,
        "qre": cfg.get("qre", {}),
    }
    return spec, config, meta


# ---------------------------------------------------------------------------
# File emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return np.format_float_scientific(x, precision=17, trim="-")


def write_trajectory_csv(path: Path, model: QuantumModel, solution,
                         segmentations) -> None:
    policy = solution.policy
    diag = solution.diagnostics
    states = solution.trajectory.states
    n_ch = policy.n_channels
    labels_per_channel = [seg.labels_per_interval() for seg in segmentations]
    node_labels = []
    for m in range(policy.n_intervals + 1):
        idx = min(m, policy.n_intervals - 1)
        node_labels.append("|".join(lab[idx] for lab in labels_per_channel))
    node_u = np.concatenate([policy.values, policy.values[:, -1:]], axis=1)

    header = ["t"]
    header += [f"u_{k + 1}" for k in range(n_ch)]
    header += ["K"]
    header += [f"K_u{k + 1}" for k in range(n_ch)]
    header += ["arc_label"]
    header += [f"c_{i}" for i in range(model.dim)]
    lines = [f"# schema: {TRAJECTORY_SCHEMA}", ",".join(header)]
    for m in range(policy.n_intervals + 1):
        row = [_fmt(policy.times[m])]
        row += [_fmt(node_u[k, m]) for k in range(n_ch)]
        row += [_fmt(diag.pf[m])]
        row += [_fmt(diag.switching[k, m]) for k in range(n_ch)]
        row += [node_labels[m]]
        row += [_fmt(states[m, i]) for i in range(model.dim)]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def write_report(path: Path, entries: list[tuple[str, object]]) -> None:
    lines = [f"# schema: {REPORT_SCHEMA}"]
    for key, value in entries:
        if isinstance(value, float):
            value = _fmt(value)
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n")


def write_solution_json(path: Path, cfg: dict, solution, start_index: int) -> None:
    payload = {
        "schema": SOLUTION_SCHEMA,
        "config": cfg,
        "start_index": start_index,
        "mode": solution.mode,
        "horizon": solution.horizon,
        "J": solution.objective,
        "converged": bool(solution.record.converged),
        "iterations": solution.record.iterations,
        "residual": float(solution.record.residual),
        "abnormal": bool(solution.abnormal),
        "residuals": {k: float(v) for k, v in solution.residuals.items()},
        "policy": {
            "t0": solution.policy.t0,
            "h": solution.policy.h,
            "values": solution.policy.values.tolist(),
            "bounds": solution.policy.bounds.tolist(),
        },
    }
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _solution_entries(prefix: str, sol) -> list[tuple[str, object]]:
    entries = [
        (f"{prefix}.J", sol.objective),
        (f"{prefix}.converged", sol.record.converged),
        (f"{prefix}.iterations", sol.record.iterations),
        (f"{prefix}.gradient_residual", float(sol.record.residual)),
        (f"{prefix}.abnormal", sol.abnormal),
    ]
    entries += [(f"{prefix}.residual.{k}", float(v)) for k, v in sorted(sol.residuals.items())]
    return entries


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_solve(args, periodic: bool) -> int:
    cfg = load_config(args.config)
    spec, config, meta = build_problem(cfg, args)
    if periodic and not isinstance(spec.mode, PeriodicMode):
        raise ConfigError("solve-periodic requires problem.mode = 'periodic'")
    if not periodic and not isinstance(spec.mode, TerminalMode):
        raise ConfigError("solve-terminal requires problem.mode = 'terminal'")
    out = Path(args.out or "qextremal-out")
    out.mkdir(parents=True, exist_ok=True)
    solve = solve_periodic if periodic else solve_terminal

    starts = initial_policies(spec.model, spec.horizon, config)
    solutions = []
    if spec.free_horizon:
        bracket = meta.get("bracket")
        if not bracket or len(bracket) != 2:
            raise ConfigError("free-horizon runs need problem.bracket = [lo, hi]")
        sol = optimize_free_horizon(spec, starts[0], config,
                                    (float(bracket[0]), float(bracket[1])))
        solutions.append(sol)
    else:
        for policy in starts:
            solutions.append(solve(spec, policy, config))

    entries: list[tuple[str, object]] = [
        ("mode", "periodic" if periodic else "terminal"),
        ("model", cfg["model"]["name"]),
        ("n_starts", len(solutions)),
        ("grid", config.grid),
        ("seed", config.seed),
    ]
    best = max(range(len(solutions)), key=lambda i: solutions[i].objective)
    entries.append(("best_start", best))
    entries.append(("best_J", solutions[best].objective))
    entries.append(("converged_starts",
                    sum(1 for s in solutions if s.record.converged)))
    for i, sol in enumerate(solutions):
        write_solution_json(out / f"solution_{i}.json", cfg, sol, i)
        segs = arcs_mod.classify_arcs(sol, spec.model)
        write_trajectory_csv(out / f"trajectory_{i}.csv", spec.model, sol, segs)
        entries += _solution_entries(f"start_{i}", sol)
    report = arcs_mod.theorem1_structure_report(
        solutions[best], spec.model, free_horizon=spec.free_horizon,
        objective=spec.observable)
    entries += [
        ("structure.verdict", report.verdict),
        ("structure.first_labels", "|".join(report.first_labels)),
        ("structure.last_labels", "|".join(report.last_labels)),
        ("structure.n_junctions", report.n_junctions),
        ("structure.P_total", report.count.p_total),
        ("structure.C_total", report.count.c_total),
        ("structure.max_corner_pf_jump", report.max_corner_pf_jump),
    ]
    write_report(out / "report.txt", entries)
    if not any(s.record.converged for s in solutions):
        print("no start converged", file=sys.stderr)
        return 2
    print(f"best J = {solutions[best].objective:.12g} "
          f"({out / 'report.txt'})")
    return 0


def _cmd_classify(args) -> int:
    path = Path(args.solution)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read solution file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno} "
            f"(offset {exc.pos}): {exc.msg}"
        ) from exc
    if payload.get("schema") != SOLUTION_SCHEMA:
        raise ConfigError(
            f"{path}: expected schema '{SOLUTION_SCHEMA}', got "
            f"'{payload.get('schema')}'"
        )
    cfg = payload["config"]
    spec, config, _ = build_problem(cfg)
    pol = payload["policy"]
    policy = ControlPolicy(values=np.asarray(pol["values"], dtype=float),
                           h=float(pol["h"]),
                           bounds=np.asarray(pol["bounds"], dtype=float),
                           t0=float(pol.get("t0", 0.0)))

    # rebuild state/costate deterministically from the stored policy
    from .dynamics import propagate_costate_backward, propagate_state
    from .solver import _normalized_terminal_costate, _PeriodicEngine

    model = spec.model
    if payload["mode"] == "terminal":
        traj = propagate_state(model, policy, spec.mode.rho0)
        j = float(spec.observable.coeffs @ traj.states[-1])
        o_n = _normalized_terminal_costate(spec.observable.coeffs, j,
                                           model.basis.trace_vector)
        back = propagate_costate_backward(model, policy, o_n)
        traj = traj.with_costates(back.costates)
    else:
        engine = _PeriodicEngine(spec, policy)
        j, _, aux = engine.evaluate(policy.values)
        traj = aux["trajectory"]
    diag = compute_diagnostics(model, policy, traj)

    from .solver import ConvergenceRecord, ExtremalSolution

    sol = ExtremalSolution(policy=policy, trajectory=traj, diagnostics=diag,
                           objective=j,
                           record=ConvergenceRecord(
                               converged=payload.get("converged", False),
                               iterations=payload.get("iterations", 0),
                               residual=payload.get("residual", np.nan)),
                           residuals={}, mode=payload["mode"],
                           horizon=payload["horizon"])
    segs = arcs_mod.classify_arcs(sol, model)
    report = arcs_mod.theorem1_structure_report(sol, model,
                                                 objective=spec.observable)
    corners = arcs_mod.verify_corner_conditions(sol, model, segs)

    entries: list[tuple[str, object]] = [
        ("source", str(path)),
        ("mode", payload["mode"]),
        ("J", j),
        ("structure.verdict", report.verdict),
        ("structure.n_junctions", report.n_junctions),
        ("structure.P_total", report.count.p_total),
        ("structure.C_total", report.count.c_total),
    ]
    for seg in segs:
        for i, s in enumerate(seg.segments):
            entries.append((f"channel_{seg.channel}.segment_{i}",
                            f"{s.label}[{_fmt(s.start_time)},{_fmt(s.end_time)}]"))
        entries.append((f"channel_{seg.channel}.ambiguous_intervals",
                        len(seg.ambiguous_intervals)))
    for i, rep in enumerate(corners):
        entries.append((f"junction_{i}.kind", rep.junction.kind))
        entries.append((f"junction_{i}.pf_jump", rep.pf_jump))
        entries.append((f"junction_{i}.switching_abs", rep.switching_abs))
    out = Path(args.out) if args.out else path.with_suffix(".structure.txt")
    if out.is_dir():
        out = out / (path.stem + ".structure.txt")
    write_report(out, entries)
    print(f"structure report written to {out}")
    return 0


def _cmd_verify(args) -> int:
    cfg = load_config(args.config)
    spec, config, meta = build_problem(cfg, args)
    out = Path(args.out or "qextremal-out")
    out.mkdir(parents=True, exist_ok=True)
    theorem = args.theorem
    entries: list[tuple[str, object]] = [("theorem", theorem)]

    if theorem == 1:
        if not isinstance(spec.mode, TerminalMode):
            raise ConfigError("theorem 1 verification uses a terminal problem")
        sols = [solve_terminal(spec, p, config)
                for p in initial_policies(spec.model, spec.horizon, config)]
        best = max(sols, key=lambda s: s.objective)
        report = arcs_mod.theorem1_structure_report(
            best, spec.model, free_horizon=spec.free_horizon,
            objective=spec.observable)
        verdict = {"CONSISTENT": "PASS", "DEGENERATE": "DEGENERATE",
                   "INCONSISTENT": "FAIL"}[report.verdict]
        entries += [
            ("verdict", verdict),
            ("first_labels", "|".join(report.first_labels)),
            ("last_labels", "|".join(report.last_labels)),
            ("pf_range_relative", report.pf_range_relative),
            ("notes", "; ".join(report.notes) or "none"),
            ("J", best.objective),
        ]
    elif theorem == 2:
        if not isinstance(spec.mode, PeriodicMode):
            raise ConfigError("theorem 2 verification uses a periodic problem")
        sols = [solve_periodic(spec, p, config)
                for p in initial_policies(spec.model, spec.horizon, config)]
        best = max(sols, key=lambda s: s.objective)
        rep = theorem2_consistency_check(spec, best, n=args.n)
        entries += [
            ("verdict", "PASS" if rep.improvable else "FAIL"),
            ("n", rep.n),
            ("violation", rep.violation),
            ("relative_violation", rep.relative_violation),
            ("second_eigenvalue_abs", rep.second_eigenvalue_abs),
            ("J", best.objective),
        ]
    elif theorem == 3:
        qre_cfg = meta["qre"]
        verdict = qre_mod.verify_theorem3(
            spec, config,
            max_switches=int(qre_cfg.get("max_switches", 2)),
            placement_grid=int(qre_cfg.get("placement_grid", 32)))
        entries.append(("verdict", verdict.verdict))
        entries += [(f"evidence.{k}", v) for k, v in sorted(verdict.evidence.items())
                    if not isinstance(v, dict)]
    elif theorem == 4:
        qre_cfg = meta["qre"]
        channel = int(qre_cfg.get("collision_channel", 0))
        verdict = qre_mod.verify_theorem4(spec, channel, config)
        entries.append(("verdict", verdict.verdict))
        entries += [(f"evidence.{k}", v) for k, v in sorted(verdict.evidence.items())]
    else:
        raise ConfigError("theorem must be one of 1, 2, 3, 4")

    write_report(out / f"verify_theorem{theorem}.txt", entries)
    verdict_value = dict(entries).get("verdict")
    print(f"theorem {theorem}: {verdict_value}")
    return 0


def _cmd_qre_bangbang(args) -> int:
    cfg = load_config(args.config)
    spec, config, meta = build_problem(cfg, args)
    qre_cfg = meta["qre"]
    result = qre_mod.brute_force_bangbang(
        spec,
        max_switches=int(args.max_switches or qre_cfg.get("max_switches", 2)),
        placement_grid=int(args.placement_grid or qre_cfg.get("placement_grid", 32)),
        cap=int(qre_cfg.get("cap", 1_000_000)),
    )
    out = Path(args.out or "qextremal-out")
    out.mkdir(parents=True, exist_ok=True)
    entries: list[tuple[str, object]] = [
        ("J_oracle", result.best_objective),
        ("n_candidates", result.n_candidates),
        ("placement_grid", result.placement_grid),
    ]
    for k in range(result.best_sequence.n_channels):
        entries.append((f"channel_{k}.switch_times",
                        ";".join(_fmt(t) for t in result.best_sequence.switch_times[k])
                        or "none"))
        entries.append((f"channel_{k}.leg_values",
                        ";".join(_fmt(v) for v in result.best_sequence.leg_values[k])))
    write_report(out / "qre_bangbang.txt", entries)
    print(f"oracle J = {result.best_objective:.12g} "
          f"({result.n_candidates} candidates)")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _add_common(parser):
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--starts", type=int, default=None)
    parser.add_argument("--grid", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qextremal",
        description="Pontryagin-extremal policies for bilinear quantum master "
                    "equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("solve-terminal", help="terminal Mayer problem"))
    _add_common(sub.add_parser("solve-periodic", help="periodic quasistationary problem"))
    p = sub.add_parser("classify", help="arc structure of an emitted solution")
    p.add_argument("--solution", required=True, help="solution_*.json file")
    p.add_argument("--out", default=None)
    p = sub.add_parser("verify", help="check one of the structure theorems")
    p.add_argument("--theorem", type=int, required=True, choices=(1, 2, 3, 4))
    p.add_argument("--n", type=int, default=2, help="period multiple for theorem 2")
    _add_common(p)
    p = sub.add_parser("qre-bangbang", help="brute-force switch-grid oracle")
    p.add_argument("--max-switches", type=int, default=None)
    p.add_argument("--placement-grid", type=int, default=None)
    _add_common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve-terminal":
            return _cmd_solve(args, periodic=False)
        if args.command == "solve-periodic":
            return _cmd_solve(args, periodic=True)
        if args.command == "classify":
            return _cmd_classify(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "qre-bangbang":
            return _cmd_qre_bangbang(args)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except QExtremalError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
