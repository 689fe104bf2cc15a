"""Batch front end.

Each subcommand reads a JSON run configuration, drives one module, and
writes deterministic artifacts into the output directory: CSV for numeric
series (full double precision, header row, '\\n' rows), JSON manifests
that embed the resolved configuration and the tolerances used, and
optional SVG plots rendered without timestamps so identical runs produce
identical bytes.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 verification failure, 4 evolution blow-up.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .classification import find_critical_speed, scan, theorem_verdict
from .errors import ConfigError, FitError, SolverError, UncoveredCaseError
from .evolution import (
    EvolutionConfig,
    build_virial,
    default_virial_radius,
    evolve,
    instability_experiment,
)
from .functionals import ModelParams, functional_report, scaling_criterion
from .ground_state import (
    GroundState,
    SolverConfig,
    solve_double_power,
    solve_single_power,
)
from .kernels import (
    TransformRoute,
    compute_G,
    compute_K_km,
    fit_tail,
    g1_origin_check,
    kernel_mass,
    kernel_tail_constant,
)
from .spectral import Field, Grid, default_grid, derivative, sobolev_norm

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3
EXIT_BLOWUP = 4

_EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class _Context:
    out: Path
    plots: bool
    threads: Optional[int]
    verbose: bool

    def say(self, text: str) -> None:
        if self.verbose:
            print(text, file=sys.stderr)


# ---------------------------------------------------------------- config


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _require(block: dict, keys: tuple, where: str) -> None:
    missing = sorted(k for k in keys if k not in block)
    if missing:
        raise ConfigError(f"{where} block is missing: {', '.join(missing)}")


def _parse_model(block) -> tuple:
    """Returns ("double", ModelParams) or ("single", sigma, power)."""
    if not isinstance(block, dict):
        raise ConfigError("a model block (JSON object) is required")
    _reject_unknown(block, {"sigma", "p", "q", "a", "c", "coeffs", "power"}, "model")
    if "power" in block:
        clash = sorted({"p", "q", "a", "coeffs"} & set(block))
        if clash:
            raise ConfigError(
                f"single-power model cannot carry {', '.join(clash)}"
            )
        _require(block, ("sigma",), "model")
        if float(block.get("c", 1.0)) != 1.0:
            raise ConfigError("single-power solves are normalized to unit speed")
        return ("single", float(block["sigma"]), int(block["power"]))
    _require(block, ("sigma", "p", "q", "a"), "model")
    coeffs = block.get("coeffs")
    params = ModelParams(
        sigma=float(block["sigma"]),
        p=block["p"],
        q=block["q"],
        a=block["a"],
        c=float(block.get("c", 1.0)),
        coeffs=tuple(float(v) for v in coeffs) if coeffs is not None else None,
    )
    return ("double", params)


def _parse_grid(block, sigma: float) -> Grid:
    if block is None:
        return default_grid(sigma)
    _reject_unknown(block, {"half_length", "num_points"}, "grid")
    _require(block, ("half_length", "num_points"), "grid")
    return Grid(float(block["half_length"]), int(block["num_points"]))


def _parse_solver(block) -> Optional[SolverConfig]:
    if block is None:
        return None
    _reject_unknown(
        block, {"max_iter", "tol_residual", "stab_exponent", "damping"}, "solver"
    )
    kwargs = {k: block[k] for k in block}
    return SolverConfig(**kwargs)


def _grid_dict(grid: Grid) -> dict:
    return {"half_length": grid.half_length, "num_points": grid.num_points}


def _scrub(obj):
    """NaN/inf to None so manifests stay valid strict JSON."""
    if isinstance(obj, dict):
        return {k: _scrub(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_scrub(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.floating, np.integer)):
        return _scrub(obj.item())
    return obj


# ------------------------------------------------------------- artifacts


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(_scrub(payload), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def _write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _figure():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "fkdvlab"
    return plt


def _save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def _plot_profile(field: Field, title: str, path: Path) -> None:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(field.grid.x, field.values, lw=1.2)
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def _plot_waterfall(snapshots, path: Path) -> None:
    plt = _figure()
    fig, ax = plt.subplots(figsize=(7, 6))
    spread = max(float(np.max(np.abs(f.values))) for _, f in snapshots)
    for k, (t, field) in enumerate(snapshots):
        ax.plot(field.grid.x, field.values + 1.5 * spread * k, lw=0.9)
        ax.text(
            field.grid.x[0], 1.5 * spread * k, f"t={t:g}", fontsize=8, va="bottom"
        )
    ax.set_xlabel("x")
    ax.set_yticks([])
    ax.set_title("snapshots (offset)")
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


# -------------------------------------------------------------- commands


def _solve_state(cfg: dict, ctx: _Context) -> tuple[GroundState, Grid, dict]:
    kind = _parse_model(cfg.get("model"))
    solver = _parse_solver(cfg.get("solver"))
    if kind[0] == "single":
        _, sigma, power = kind
        grid = _parse_grid(cfg.get("grid"), sigma)
        ctx.say(f"solving single-power state: sigma={sigma} power={power}")
        state = solve_single_power(sigma, power, grid, solver)
    else:
        params = kind[1]
        grid = _parse_grid(cfg.get("grid"), params.sigma)
        ctx.say(f"solving ground state: {params.as_dict()}")
        state = solve_double_power(params, grid, solver)
    resolved = {
        "model": state.params.as_dict(),
        "grid": _grid_dict(grid),
        "solver": {
            "tol_residual": (solver or SolverConfig()).tol_residual,
            "max_iter": (solver or SolverConfig()).max_iter,
        },
    }
    return state, grid, resolved


def cmd_solve(cfg: dict, ctx: _Context) -> int:
    _reject_unknown(
        cfg, {"model", "grid", "solver", "output_dir", "emit_plots"}, "config"
    )
    state, grid, resolved = _solve_state(cfg, ctx)
    report = functional_report(state.profile, state.params)
    _write_csv(
        ctx.out / "profile.csv",
        ["x", "u"],
        zip(grid.x.tolist(), state.profile.values.tolist()),
    )
    _write_json(
        ctx.out / "report.json",
        {
            "command": "solve",
            "config": resolved,
            "converged": state.converged,
            "iterations": state.iterations,
            "residual": state.residual,
            "method": state.method,
            "monotone_modulus": state.monotone_modulus,
            "report": report.as_dict(),
        },
    )
    if ctx.plots:
        _plot_profile(state.profile, "ground state", ctx.out / "profile.svg")
    print(f"converged in {state.iterations} iterations, residual {state.residual:.3e}")
    return EXIT_OK if state.converged else EXIT_SOLVER


def cmd_classify(cfg: dict, ctx: _Context) -> int:
    _reject_unknown(
        cfg,
        {"model", "grid", "solver", "classify", "output_dir", "emit_plots"},
        "config",
    )
    block = cfg.get("classify") or {}
    _reject_unknown(block, {"evaluate"}, "classify")
    evaluate = bool(block.get("evaluate", True))
    kind = _parse_model(cfg.get("model"))
    if kind[0] != "double":
        raise ConfigError("classification needs the double-power model block")
    params = kind[1]
    verdict = theorem_verdict(params.sigma, params.p, params.q, params.a)
    payload = {
        "command": "classify",
        "config": {"model": params.as_dict(), "evaluate": evaluate},
        "case": verdict.case.value,
        "verdict": str(verdict),
        "tag": verdict.tag,
        "critical_speed_name": verdict.speed_name,
    }
    if evaluate:
        grid = _parse_grid(cfg.get("grid"), params.sigma)
        solver = _parse_solver(cfg.get("solver"))
        state = solve_double_power(params, grid, solver)
        payload["criterion"] = scaling_criterion(state.profile, params)
        payload["residual"] = state.residual
        payload["config"]["grid"] = _grid_dict(grid)
    _write_json(ctx.out / "classification.json", payload)
    print(f"{verdict.case.value}: {verdict}")
    return EXIT_OK


def cmd_critical_speed(cfg: dict, ctx: _Context) -> int:
    _reject_unknown(
        cfg,
        {"model", "grid", "solver", "search", "output_dir", "emit_plots"},
        "config",
    )
    block = cfg.get("search") or {}
    _reject_unknown(
        block, {"bracket_hint", "rel_width", "c_min", "c_max"}, "search"
    )
    kind = _parse_model(cfg.get("model"))
    if kind[0] != "double":
        raise ConfigError("the speed search needs the double-power model block")
    params = kind[1]
    grid = cfg.get("grid")
    grid = _parse_grid(grid, params.sigma) if grid is not None else None
    solver = _parse_solver(cfg.get("solver"))
    kwargs = {}
    if "bracket_hint" in block:
        kwargs["bracket_hint"] = tuple(float(v) for v in block["bracket_hint"])
    for key in ("rel_width", "c_min", "c_max"):
        if key in block:
            kwargs[key] = float(block[key])
    ctx.say(f"bracketing criterion sign change for {params.as_dict()}")
    result = find_critical_speed(params, grid=grid, config=solver, **kwargs)
    _write_json(
        ctx.out / "critical_speed.json",
        {
            "command": "critical-speed",
            "config": {"model": params.as_dict(), "search": block},
            "found": result.found,
            "lower": result.lower,
            "upper": result.upper,
            "relative_width": result.relative_width if result.found else None,
            "note": result.note,
            "evaluations": [list(e) for e in result.evaluations],
        },
    )
    if result.found:
        print(f"bracket [{result.lower:.6g}, {result.upper:.6g}]")
    else:
        print(f"no bracket: {result.note}")
    return EXIT_OK


def cmd_scan(cfg: dict, ctx: _Context) -> int:
    _reject_unknown(
        cfg, {"scan", "grid", "solver", "output_dir", "emit_plots"}, "config"
    )
    block = cfg.get("scan") or {}
    _reject_unknown(block, {"sigma", "pq", "a", "c"}, "scan")
    _require(block, ("sigma", "pq", "a", "c"), "scan")
    pq = [tuple(int(v) for v in pair) for pair in block["pq"]]
    grid = cfg.get("grid")
    sigmas = [float(s) for s in block["sigma"]]
    if grid is not None:
        if len(set(sigmas)) > 1:
            raise ConfigError("a fixed grid only makes sense for a single sigma")
        grid = _parse_grid(grid, sigmas[0])
    solver = _parse_solver(cfg.get("solver"))
    rows = scan(
        sigmas,
        pq,
        [int(a) for a in block["a"]],
        [float(c) for c in block["c"]],
        grid=grid,
        config=solver,
        max_workers=ctx.threads,
    )
    header = [
        "sigma", "p", "q", "a", "c", "case", "verdict",
        "criterion", "residual", "nehari", "pohozaev", "status",
    ]
    out_rows = []
    for row in rows:
        verdict = row.verdict + (f" [{row.tag}]" if row.tag else "")
        out_rows.append([
            row.sigma, row.p, row.q, row.a, row.c, row.case, verdict,
            row.criterion, row.residual, row.nehari, row.pohozaev,
            row.error or "ok",
        ])
    _write_csv(ctx.out / "scan.csv", header, out_rows)
    failures = sum(1 for row in rows if row.error)
    _write_json(
        ctx.out / "scan.json",
        {
            "command": "scan",
            "config": {"scan": block},
            "rows": len(rows),
            "failures": failures,
        },
    )
    print(f"{len(rows)} rows, {failures} failures")
    return EXIT_OK


def cmd_decay(cfg: dict, ctx: _Context) -> int:
    _reject_unknown(
        cfg, {"model", "grid", "solver", "decay", "output_dir", "emit_plots"},
        "config",
    )
    block = cfg.get("decay") or {}
    _reject_unknown(
        block,
        {"derivative_orders", "window", "mode", "exponent_rtol", "residual_max"},
        "decay",
    )
    state, grid, resolved = _solve_state(cfg, ctx)
    sigma = state.params.sigma
    orders = [int(v) for v in block.get("derivative_orders", (0, 1) if sigma < 2 else (0,))]
    window = tuple(float(v) for v in block["window"]) if "window" in block else None
    mode = block.get("mode")
    exponent_rtol = float(block.get("exponent_rtol", 0.05))
    residual_max = float(block.get("residual_max", 0.05))

    fits = []
    all_pass = True
    for order in orders:
        entry = {"derivative_order": order, "requested_mode": mode}
        try:
            fit = fit_tail(state.profile, sigma, derivative_order=order,
                           window=window, mode=mode)
            entry.update(exponent=fit.exponent, constant=fit.constant,
                         window=list(fit.window), residual=fit.residual)
            accepted = fit.residual <= residual_max
            if sigma < 2 and (mode is None or mode == "algebraic"):
                expected = -(1.0 + sigma) - order
                entry["expected_exponent"] = expected
                accepted = accepted and abs(fit.exponent / expected - 1.0) <= exponent_rtol
            elif (mode or "exponential") == "exponential":
                accepted = accepted and fit.exponent < 0
            entry["accepted"] = accepted
        except FitError as exc:
            entry.update(error=str(exc), residual=exc.residual, accepted=False)
            accepted = False
        if not accepted and mode is not None:
            # the requested abscissa failed; show the natural one next to it
            fallback = fit_tail(state.profile, sigma, derivative_order=order,
                                window=window)
            entry["natural_fit"] = {
                "exponent": fallback.exponent,
                "residual": fallback.residual,
                "accepted": fallback.residual <= residual_max,
            }
            accepted = entry["natural_fit"]["accepted"]
        fits.append(entry)
        all_pass = all_pass and accepted

    x = grid.x
    du = derivative(state.profile)
    keep = x > 0
    _write_csv(
        ctx.out / "tail.csv",
        ["x", "abs_u", "abs_du"],
        zip(
            x[keep].tolist(),
            np.abs(state.profile.values[keep]).tolist(),
            np.abs(du.values[keep]).tolist(),
        ),
    )
    _write_json(
        ctx.out / "decay.json",
        {
            "command": "decay",
            "config": resolved,
            "tolerances": {
                "exponent_rtol": exponent_rtol,
                "residual_max": residual_max,
            },
            "fits": fits,
            "passed": all_pass,
        },
    )
    if ctx.plots:
        _plot_profile(state.profile, "profile", ctx.out / "profile.svg")
    for entry in fits:
        tag = "ok" if entry.get("accepted") or entry.get("natural_fit", {}).get(
            "accepted"
        ) else "FAIL"
        print(
            f"l={entry['derivative_order']}: exponent "
            f"{entry.get('exponent', float('nan')):.4f} [{tag}]"
        )
    return EXIT_OK if all_pass else EXIT_VERIFY


def _kernel_points(block) -> np.ndarray:
    pts = block.get("points")
    if pts is None:
        raise ConfigError("kernel block needs sample points")
    if isinstance(pts, dict):
        _reject_unknown(pts, {"start", "stop", "num", "spacing"}, "kernel.points")
        _require(pts, ("start", "stop", "num"), "kernel.points")
        spacing = pts.get("spacing", "log")
        if spacing == "log":
            return np.geomspace(float(pts["start"]), float(pts["stop"]), int(pts["num"]))
        if spacing == "linear":
            return np.linspace(float(pts["start"]), float(pts["stop"]), int(pts["num"]))
        raise ConfigError(f"spacing must be 'log' or 'linear', got {spacing!r}")
    return np.asarray([float(v) for v in pts])


def cmd_kernel(cfg: dict, ctx: _Context) -> int:
    _reject_unknown(cfg, {"kernel", "output_dir", "emit_plots"}, "config")
    block = cfg.get("kernel")
    if not isinstance(block, dict):
        raise ConfigError("kernel block is required")
    _reject_unknown(
        block,
        {"sigma", "kind", "k", "m", "points", "route", "rtol", "checks"},
        "kernel",
    )
    _require(block, ("sigma", "kind"), "kernel")
    sigma = float(block["sigma"])
    kind = block["kind"]
    rtol = float(block.get("rtol", 1e-6))
    route = TransformRoute(block.get("route", "oscillatory-quadrature"))
    points = _kernel_points(block)
    checks = block.get("checks") or {}
    _reject_unknown(checks, {"mass", "plateau", "origin"}, "kernel.checks")

    if kind == "resolvent":
        sample = compute_G(sigma, points, rtol=rtol, route=route,
                           max_workers=ctx.threads)
        do_mass = bool(checks.get("mass", True))
        do_plateau = bool(checks.get("plateau", sigma < 2.0))
        do_origin = bool(checks.get("origin", sigma == 1.0))
    elif kind == "commutator":
        _require(block, ("k", "m"), "kernel")
        sample = compute_K_km(int(block["k"]), int(block["m"]), sigma, points,
                              rtol=rtol, route=route, max_workers=ctx.threads)
        do_mass = bool(checks.get("mass", False))
        do_plateau = bool(checks.get("plateau", True))
        do_origin = bool(checks.get("origin", False))
    else:
        raise ConfigError(f"kind must be 'resolvent' or 'commutator', got {kind!r}")

    _write_csv(
        ctx.out / "kernel.csv",
        ["x", "value", "converged"],
        zip(
            sample.points.tolist(),
            sample.values.tolist(),
            (~sample.failed).astype(int).tolist(),
        ),
    )

    results: dict = {}
    passed = bool(sample.all_converged)
    results["all_converged"] = bool(sample.all_converged)
    if do_mass:
        total = kernel_mass(sigma, rtol=rtol)
        ok = abs(total - 1.0) <= 1e-4
        results["mass"] = {"value": total, "pass": ok}
        passed = passed and ok
    if do_plateau:
        limit = 0.02 if kind == "resolvent" else 0.10
        try:
            fit = kernel_tail_constant(sample)
            ok = fit.residual <= limit
            results["plateau"] = {
                "constant": fit.constant,
                "exponent": fit.exponent,
                "variation": fit.residual,
                "pass": ok,
            }
        except FitError as exc:
            weighted = np.abs(sample.values) * sample.points ** (1.0 + sigma)
            vanishing = "vanishes" in str(exc) or (
                weighted.size >= 2 and weighted[-1] < 0.2 * np.max(weighted)
            )
            ok = bool(vanishing)
            results["plateau"] = {
                "error": str(exc),
                "weighted_max": float(np.max(weighted)),
                "vanishing_tail": bool(vanishing),
                "pass": ok,
            }
        passed = passed and ok
    if do_origin:
        xs = [1e-4, 3e-4, 1e-3]
        table = g1_origin_check(xs, rtol=rtol)
        rows = []
        ok = True
        for x, ratio in table:
            law = 1.0 - _EULER_GAMMA / math.log(1.0 / x)
            good = math.isfinite(ratio) and abs(ratio - law) <= 5e-3
            ok = ok and good
            rows.append({"x": x, "ratio": ratio, "log_law": law, "pass": good})
        results["origin"] = {"table": rows, "pass": ok}
        passed = passed and ok

    _write_json(
        ctx.out / "kernel.json",
        {
            "command": "kernel",
            "config": {"kernel": block},
            "tolerances": {
                "rtol": rtol,
                "mass_atol": 1e-4,
                "plateau_variation_max": 0.02 if kind == "resolvent" else 0.10,
                "origin_law_atol": 5e-3,
            },
            "checks": results,
            "passed": passed,
        },
    )
    if ctx.plots:
        plt = _figure()
        fig, ax = plt.subplots(figsize=(6, 4))
        good = ~sample.failed
        ax.loglog(sample.points[good], np.abs(sample.values[good]), "o-", ms=3, lw=0.9)
        ax.set_xlabel("x")
        ax.set_ylabel("|kernel|")
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        _save_svg(fig, ctx.out / "kernel.svg")
        plt.close(fig)
    print(f"kernel checks {'passed' if passed else 'FAILED'}")
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_evolve(cfg: dict, ctx: _Context) -> int:
    _reject_unknown(
        cfg, {"model", "grid", "solver", "evolution", "output_dir", "emit_plots"},
        "config",
    )
    block = cfg.get("evolution")
    if not isinstance(block, dict):
        raise ConfigError("evolution block is required")
    _reject_unknown(
        block,
        {
            "dt", "t_end", "dealias", "sample_stride", "mu", "epsilon",
            "tube_exit", "neighborhood", "stop_on_exit", "snapshot_times",
        },
        "evolution",
    )
    _require(block, ("dt", "t_end"), "evolution")
    kind = _parse_model(cfg.get("model"))
    if kind[0] != "double":
        raise ConfigError("evolution needs the double-power model block")
    params = kind[1]
    grid = _parse_grid(cfg.get("grid"), params.sigma)
    solver = _parse_solver(cfg.get("solver"))

    run = EvolutionConfig(
        dt=float(block["dt"]),
        t_end=float(block["t_end"]),
        dealias=bool(block.get("dealias", True)),
        sample_stride=int(block.get("sample_stride", 10)),
        tube_exit=block.get("tube_exit"),
        neighborhood=block.get("neighborhood"),
        stop_on_exit=bool(block.get("stop_on_exit", False)),
        snapshot_times=block.get("snapshot_times"),
    )
    mu = float(block.get("mu", 0.0))
    epsilon = float(block.get("epsilon", 0.1))

    if mu != 0.0:
        ctx.say(f"instability experiment mu={mu} epsilon={epsilon}")
        result = instability_experiment(
            params, mu, epsilon, run, grid=grid, solver=solver
        )
        traj, state = result.trajectory, result.state
        verdict = result.verdict
        extra = {
            "mu": mu,
            "epsilon": epsilon,
            "action_drop": result.action_drop,
            "action_dropped": result.action_drop < 0,
            "virial_drift": result.virial_drift,
        }
    else:
        ctx.say("unperturbed reference run")
        state = solve_double_power(params, grid, solver)
        weight = build_virial(state, default_virial_radius(params, grid))
        traj = evolve(state.profile, params, run, reference=state, weight=weight)
        if traj.blow_up:
            verdict = "blow-up"
        elif traj.exit_time is not None:
            verdict = "escaped"
        else:
            verdict = "stayed"
        extra = {"mu": 0.0}

    _write_csv(
        ctx.out / "trajectory.csv",
        ["t", "mass_drift", "energy_drift", "shift", "tube_distance", "virial"],
        zip(
            traj.times.tolist(),
            traj.mass_drift.tolist(),
            traj.energy_drift.tolist(),
            traj.shift.tolist(),
            traj.tube_distance.tolist(),
            traj.virial.tolist(),
        ),
    )
    if traj.snapshots:
        rows = []
        for t, field in traj.snapshots:
            rows.extend(
                (t, x, u) for x, u in zip(field.grid.x.tolist(), field.values.tolist())
            )
        _write_csv(ctx.out / "snapshots.csv", ["t", "x", "u"], rows)

    payload = {
        "command": "evolve",
        "config": {
            "model": params.as_dict(),
            "grid": _grid_dict(grid),
            "evolution": {
                "dt": run.dt,
                "t_end": run.t_end,
                "dealias": run.dealias,
                "sample_stride": run.sample_stride,
            },
        },
        "tolerances": {"drift_warning": 1e-6},
        "verdict": verdict,
        "exit_time": traj.exit_time,
        "blow_up_time": traj.blow_up_time,
        "modulation_lost_time": traj.modulation_lost_time,
        "accuracy_warning": traj.accuracy_warning,
        "max_mass_drift": float(np.max(np.abs(traj.mass_drift))),
        "max_energy_drift": float(np.max(np.abs(traj.energy_drift))),
        "reference_norm": sobolev_norm(state.profile, params.sigma / 2.0),
        **extra,
    }
    _write_json(ctx.out / "verdict.json", payload)
    if ctx.plots and traj.snapshots:
        _plot_waterfall(traj.snapshots, ctx.out / "waterfall.svg")
    elif ctx.plots:
        _plot_profile(traj.final, "final state", ctx.out / "final.svg")
    print(f"verdict: {verdict}" + (f" (exit at t={traj.exit_time:g})" if traj.exit_time else ""))
    return EXIT_BLOWUP if verdict == "blow-up" else EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "classify": cmd_classify,
    "critical-speed": cmd_critical_speed,
    "scan": cmd_scan,
    "decay": cmd_decay,
    "kernel": cmd_kernel,
    "evolve": cmd_evolve,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fkdvlab",
        description="solitary-wave laboratory for double-power fractional KdV",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON run configuration")
        cmd.add_argument("--output", default=None, help="artifact directory")
        cmd.add_argument("--plots", action="store_true", help="emit SVG plots")
        cmd.add_argument("--threads", type=int, default=None)
        cmd.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        raw = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        print(f"config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(cfg, dict):
        print("config root must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.output or cfg.get("output_dir") or f"runs/{args.command}")
    plots = bool(args.plots or cfg.get("emit_plots", False))
    ctx = _Context(out=out, plots=plots, threads=args.threads, verbose=args.verbose)

    try:
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, ctx)
    except (ConfigError, UncoveredCaseError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KeyError, TypeError, ValueError) as exc:
        print(f"configuration error: {exc!r}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FitError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
