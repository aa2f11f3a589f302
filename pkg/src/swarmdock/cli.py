"""Command-line front end.

Subcommands:
  run     execute one scenario YAML file
  sweep   execute the built-in single-chaser parameter grid
  suite   execute every built-in scenario
  verify  run the numerical oracle checks and print one line per check
  report  rebuild aggregate CSV tables from existing run summaries

All run outputs land under an output directory (flag --out, else the
SWARMDOCK_OUT environment variable, else ./runs). Summary CSVs contain no
wall-clock timing, so repeated invocations with the same seed are
byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import os
import sys

import yaml

from .harness import run, scenario_suite, sweep_scenarios, write_run_outputs
from .oracles import (
    check_allocation,
    check_angular_momentum,
    check_gradient,
    check_pnp_round_trip,
    check_qp_solver,
)
from .scenario import load_scenario

SUMMARY_COLUMNS = (
    "name", "seed", "mode", "estimator", "chasers",
    "horizon_s", "dt", "falloff",
    "position_mse", "orientation_mse",
    "min_target_distance", "min_interchaser_distance",
    "final_scaled_ref_distance", "failed", "failure_time",
)

GRID_COLUMNS = ("horizon_s", "dt", "falloff", "position_mse", "orientation_mse", "failures")


def _default_out() -> str:
    return os.environ.get("SWARMDOCK_OUT", "runs")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _summary_row(summary: dict) -> dict:
    m = summary["metrics"]
    pos = sum(m["position_mse"]) / len(m["position_mse"])
    att = sum(m["orientation_mse"]) / len(m["orientation_mse"])
    return {
        "name": summary["name"],
        "seed": summary["seed"],
        "mode": summary["mode"],
        "estimator": summary["estimator"],
        "chasers": summary["chasers"],
        "horizon_s": summary["grid"]["horizon_s"],
        "dt": summary["grid"]["dt"],
        "falloff": summary["grid"]["falloff"],
        "position_mse": pos,
        "orientation_mse": att,
        "min_target_distance": min(m["min_target_distance"]),
        "min_interchaser_distance": m["min_interchaser_distance"],
        "final_scaled_ref_distance": max(m["final_scaled_ref_distance"]),
        "failed": int(m["failed"]),
        "failure_time": m["failure_time"],
    }


def write_summary_csv(summaries: list[dict], path) -> None:
    rows = sorted((_summary_row(s) for s in summaries), key=lambda r: r["name"])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in SUMMARY_COLUMNS) + "\n")


def write_grid_csv(summaries: list[dict], path) -> None:
    """Table of the sweep grid: mean MSE over completed repetitions + failures."""
    groups: dict[tuple, list[dict]] = {}
    for s in summaries:
        if not s["name"].startswith("sweep_"):
            continue
        key = (s["grid"]["horizon_s"], s["grid"]["dt"], s["grid"]["falloff"])
        groups.setdefault(key, []).append(s)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(GRID_COLUMNS) + "\n")
        for key in sorted(groups):
            runs = groups[key]
            done = [r for r in runs if not r["metrics"]["failed"]]
            failures = len(runs) - len(done)
            if done:
                pos = sum(sum(r["metrics"]["position_mse"]) / len(r["metrics"]["position_mse"])
                          for r in done) / len(done)
                att = sum(sum(r["metrics"]["orientation_mse"]) / len(r["metrics"]["orientation_mse"])
                          for r in done) / len(done)
            else:
                pos = att = None
            cells = [_fmt(key[0]), _fmt(key[1]), _fmt(key[2]), _fmt(pos), _fmt(att), str(failures)]
            fh.write(",".join(cells) + "\n")


def _execute_one(job: tuple) -> dict:
    cfg, out_dir = job
    log = run(cfg)
    return write_run_outputs(log, out_dir)


def _run_batch(configs, out_root: str, jobs: int) -> list[dict]:
    os.makedirs(out_root, exist_ok=True)
    work = [(cfg, os.path.join(out_root, cfg.name)) for cfg in configs]
    jobs = max(1, min(jobs, len(work)))
    if jobs == 1:
        summaries = [_execute_one(w) for w in work]
    else:
        with multiprocessing.Pool(jobs) as pool:
            summaries = pool.map(_execute_one, work)
    return summaries


def _write_trace(log, path) -> None:
    cols = "t,cost,violation,inner,outer,evals,converged,wall_s"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cols + "\n")
        for k in range(log.ticks):
            fh.write(
                f"{log.time[k]:.12g},{log.solver_cost[k]:.12g},"
                f"{log.solver_violation[k]:.12g},{log.solver_inner[k]},"
                f"{log.solver_outer[k]},{log.solver_evals[k]},"
                f"{int(log.solver_converged[k])},{log.solver_wall[k]:.6g}\n"
            )


def _cmd_run(args) -> int:
    if not os.path.isfile(args.scenario):
        print(f"scenario file not found: {args.scenario}", file=sys.stderr)
        return 2
    try:
        cfg = load_scenario(args.scenario)
    except (ValueError, KeyError, TypeError, yaml.YAMLError) as exc:
        print(f"invalid scenario config: {exc}", file=sys.stderr)
        return 3
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_dir = os.path.join(args.out, cfg.name)
    try:
        log = run(cfg)
        summary = write_run_outputs(log, out_dir)
        if args.trace:
            _write_trace(log, os.path.join(out_dir, "solver_trace.csv"))
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return 4
    m = summary["metrics"]
    status = "FAILED" if m["failed"] else "ok"
    print(f"{cfg.name}: {status} position_mse={_fmt(sum(m['position_mse'])/len(m['position_mse']))} "
          f"orientation_mse={_fmt(sum(m['orientation_mse'])/len(m['orientation_mse']))}")
    print(f"outputs in {out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    configs = sweep_scenarios(args.seed, duration_s=args.duration)
    try:
        summaries = _run_batch(configs, args.out, args.jobs)
        write_summary_csv(summaries, os.path.join(args.out, "summary.csv"))
        write_grid_csv(summaries, os.path.join(args.out, "grid.csv"))
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return 4
    failures = sum(int(s["metrics"]["failed"]) for s in summaries)
    print(f"sweep complete: {len(summaries)} runs, {failures} failed; outputs in {args.out}")
    return 0


def _cmd_suite(args) -> int:
    configs = scenario_suite(args.seed, duration_s=args.duration)
    try:
        summaries = _run_batch(configs, args.out, args.jobs)
        write_summary_csv(summaries, os.path.join(args.out, "summary.csv"))
        write_grid_csv(summaries, os.path.join(args.out, "grid.csv"))
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return 4
    failures = sum(int(s["metrics"]["failed"]) for s in summaries)
    print(f"suite complete: {len(summaries)} runs, {failures} failed; outputs in {args.out}")
    return 0


def _cmd_verify(_args) -> int:
    checks = [
        check_gradient(),
        check_pnp_round_trip(),
        check_allocation(),
        check_qp_solver(),
        check_angular_momentum(),
    ]
    for result in checks:
        print(result.line())
    return 0 if all(r.passed for r in checks) else 1


def _cmd_report(args) -> int:
    summaries = []
    for root, _dirs, files in os.walk(args.out):
        if "summary.json" in files:
            with open(os.path.join(root, "summary.json"), encoding="utf-8") as fh:
                summaries.append(json.load(fh))
    if not summaries:
        print(f"no run summaries found under {args.out}", file=sys.stderr)
        return 5
    try:
        write_summary_csv(summaries, os.path.join(args.out, "summary.csv"))
        write_grid_csv(summaries, os.path.join(args.out, "grid.csv"))
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return 4
    print(f"aggregated {len(summaries)} runs into {args.out}/summary.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmdock",
        description="Multi-agent spacecraft tracking and docking simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario YAML file")
    p_run.add_argument("--scenario", required=True, help="path to a scenario YAML file")
    p_run.add_argument("--out", default=_default_out(), help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--trace", action="store_true", help="also write per-tick solver diagnostics")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the single-chaser parameter grid")
    p_sweep.add_argument("--out", default=_default_out(), help="output directory")
    p_sweep.add_argument("--seed", type=int, default=0, help="master seed for the whole grid")
    p_sweep.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                         help="parallel worker processes")
    p_sweep.add_argument("--duration", type=float, default=120.0,
                         help="simulated seconds per run")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_suite = sub.add_parser("suite", help="run every built-in scenario")
    p_suite.add_argument("--out", default=_default_out(), help="output directory")
    p_suite.add_argument("--seed", type=int, default=0, help="master seed for the whole suite")
    p_suite.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                         help="parallel worker processes")
    p_suite.add_argument("--duration", type=float, default=None,
                         help="override every scenario's simulated seconds")
    p_suite.set_defaults(func=_cmd_suite)

    p_verify = sub.add_parser("verify", help="run the numerical oracle checks")
    p_verify.set_defaults(func=_cmd_verify)

    p_report = sub.add_parser("report", help="aggregate existing run summaries")
    p_report.add_argument("--out", default=_default_out(),
                          help="directory containing run outputs")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
