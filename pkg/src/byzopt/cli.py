"""Command-line entry points.

Subcommands: ``run`` one experiment, ``sweep`` a parameter grid over seeds,
``bounds`` the derived step-size/penalty constants, ``validate`` a config,
``regen-golden`` the committed regression fixtures.

Exit codes: 0 success, 1 config error, 2 divergence abort (partial CSV is
kept).
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from byzopt import config as cfgmod
from byzopt import engine, kernels, objective, rngstream, topology

VERSION = "0.1.0"


def _jsonable(obj):
    """Strict-JSON-safe copy: non-finite floats become null (strict JSON has
    no NaN/Infinity tokens, and downstream consumers parse strictly)."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_run(out_dir: Path, cfg_dict, result: engine.RunResult):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.csv", "w") as fh:
        fh.write(engine.CSV_HEADER + "\n")
        for row in result.rows:
            fh.write(row.as_csv() + "\n")
    np.savez(out_dir / "final_states.npz", x0=result.x0,
             final_states=result.final_states, x_star=result.x_star)
    meta = {
        "version": VERSION,
        "kernels": kernels.IMPL,
        "resolved_config": cfg_dict,
        "bounds": asdict(result.bounds) if result.bounds else None,
        "alpha0": result.alpha0,
        "resolved_schedule": result.resolved_schedule,
        "warnings": result.warnings,
        "diverged": result.diverged,
        "diverged_at": result.diverged_at,
        "gradient_evaluations": result.evals,
        "epochs": result.epochs,
        "trigger_prob_note": (
            "bound calculators use the theory trigger probabilities "
            "p_min=1/q_max, p_max=1/q_min regardless of the configured range"),
        "final": {
            "optimal_gap": result.rows[-1].optimal_gap,
            "consensus_error": result.rows[-1].consensus_error,
            "test_accuracy": result.rows[-1].test_accuracy,
            "dist_sq": result.dist_sq[-1],
        },
    }
    with open(out_dir / "meta.json", "w") as fh:
        json.dump(_jsonable(meta), fh, indent=2)
    return meta


def cmd_run(args):
    try:
        run_cfg, cfg_dict = cfgmod.load(args.config, overrides=args.set or ())
        engine.validate_config(run_cfg)
    except (engine.ConfigError, topology.TopologyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    result = engine.run(run_cfg)
    _write_run(Path(args.out), cfg_dict, result)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if result.diverged:
        print(f"run diverged at iteration {result.diverged_at}; partial metrics kept",
              file=sys.stderr)
        return 2
    return 0


def cmd_bounds(args):
    try:
        run_cfg, _ = cfgmod.load(args.config, overrides=args.set or ())
        engine.validate_config(run_cfg)
    except (engine.ConfigError, topology.TopologyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    t, p = run_cfg.topology, run_cfg.problem
    rel = sorted(t.reliable)
    try:
        x_star = objective.solve_centralized(p, rel, tol=run_cfg.oracle_tol)
    except objective.ObjectiveError as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return 1
    theta_hint = run_cfg.schedule.theta if run_cfg.schedule.kind.endswith("decaying") else None
    b = engine.compute_bounds(t, p, run_cfg.phi, theta=theta_hint)
    rows = [("gamma", b.gamma), ("kappa_f", b.kappa_f), ("kappa_q", b.kappa_q),
            ("P1_c", b.P1_c), ("P2", b.P2), ("E", b.E), ("P1_d", b.P1_d),
            ("alpha_max_linear", b.alpha_max_linear), ("theta_min", b.theta_min),
            ("xi", b.xi), ("linear_radius", b.linear_radius),
            ("sublinear_radius", b.sublinear_radius)]
    if len(rel) >= 2:
        inc = topology.incidence(t)
        gshared = -np.mean([objective.full_grad(p, i, x_star) for i in rel], axis=0)
        psi = [objective.full_grad(p, i, x_star) + gshared for i in rel]
        rows.insert(0, ("min_penalty", topology.min_penalty(inc, psi, inc.pi.shape[1])))
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value:.10g}")
    return 0


def cmd_sweep(args):
    try:
        grid = _parse_grid(Path(args.grid))
        base = cfgmod.resolve(args.config, overrides=args.set or ())
    except (engine.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys))) or [()]
    failures = []
    cells = []
    for g_idx, combo in enumerate(combos):
        for s_idx in range(args.seeds):
            overrides = [f"{k}={v}" for k, v in zip(keys, combo)]
            if s_idx > 0:  # seed 0 replays the base seed, so a 1-cell sweep == run
                cell_seed = int(rngstream.stream(base["run"]["master_seed"],
                                                 rngstream.SWEEP_CELL, g_idx, s_idx)
                                .integers(2 ** 62))
                overrides.append(f"run.master_seed={cell_seed}")
            name_bits = [f"{k.split('.')[-1]}={v}" for k, v in zip(keys, combo)]
            cell_name = "_".join(name_bits + [f"seed{s_idx}"]) or f"cell{s_idx}"
            cell_dir = out / cell_name
            try:
                run_cfg, cfg_dict = cfgmod.load(args.config,
                                                overrides=(args.set or []) + overrides)
                engine.validate_config(run_cfg)
                result = engine.run(run_cfg)
                _write_run(cell_dir, cfg_dict, result)
                status = "diverged" if result.diverged else "ok"
            except Exception as exc:  # per-cell failures recorded, sweep continues
                status = f"error: {exc}"
            cells.append({"cell": cell_name, "grid": dict(zip(keys, combo)),
                          "seed_index": s_idx, "status": status})
            if status.startswith("error"):
                failures.append(cell_name)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.json", "w") as fh:
        json.dump({"cells": cells, "failures": failures}, fh, indent=2, default=str)
    if failures:
        print(f"{len(failures)} cell(s) failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def _parse_grid(path: Path):
    """Grid file: one "section.key = v1, v2, v3" line per swept key."""
    grid = {}
    for ln in path.read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise engine.ConfigError(f"bad grid line: {ln!r}")
        dotted, values = ln.split("=", 1)
        dotted = dotted.strip()
        sec, key = dotted.split(".", 1)
        if sec not in cfgmod.SCHEMA or key not in cfgmod.SCHEMA[sec]:
            raise engine.ConfigError(f"unknown grid key {dotted}")
        grid[dotted] = [v.strip() for v in values.split(",") if v.strip()]
    if not grid:
        raise engine.ConfigError(f"empty grid file {path}")
    return grid


def cmd_validate(args):
    try:
        run_cfg, _ = cfgmod.load(args.config, overrides=args.set or ())
        engine.validate_config(run_cfg)
    except (engine.ConfigError, topology.TopologyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    print("config ok")
    return 0


GOLDEN_TOPOLOGY = dict(m=30, edge_prob=0.3, byz_count=5, seed=42)


def cmd_regen_golden(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t = topology.gen_erdos_renyi(**GOLDEN_TOPOLOGY)
    path = out / "topology_m30_p03_b5_s42.txt"
    topology.save_topology(t, path)
    print(f"wrote {path}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="byzopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("config")
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    run_p.set_defaults(func=cmd_run)

    bounds_p = sub.add_parser("bounds", help="print derived convergence constants")
    bounds_p.add_argument("config")
    bounds_p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    bounds_p.set_defaults(func=cmd_bounds)

    sweep_p = sub.add_parser("sweep", help="run a parameter grid x seeds")
    sweep_p.add_argument("config")
    sweep_p.add_argument("--grid", required=True)
    sweep_p.add_argument("--seeds", type=int, default=1)
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    sweep_p.set_defaults(func=cmd_sweep)

    val_p = sub.add_parser("validate", help="validate a config without running")
    val_p.add_argument("config")
    val_p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    val_p.set_defaults(func=cmd_validate)

    gold_p = sub.add_parser("regen-golden", help="regenerate golden regression fixtures")
    gold_p.add_argument("--out", default="tests/golden")
    gold_p.set_defaults(func=cmd_regen_golden)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
