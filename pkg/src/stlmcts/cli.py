"""Command-line entry point: ``stlmcts {plan,suite,eval-stl,make-costmap}``.

Successful commands exit 0 and print a JSON summary on stdout. Failures
exit 1 and print one JSON line ``{"error": ..., "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .harness import SuiteConfig, build_deps, run_suite, write_trajectory_csv, write_tree_csv
from .planner import PlannerConfig, plan_episode
from .policy import build_costmap_from_traces
from .scenario import build_spec, sample_episode
from .stl import Trace, parse_formula, robustness


def _add_plan(sub) -> None:
    p = sub.add_parser("plan", help="plan and fly a single episode")
    p.add_argument("--scenario", help="airspace JSON (default: built-in field)")
    p.add_argument("--start", required=True, help="start region name")
    p.add_argument("--goal", required=True, help="goal region name")
    p.add_argument("--spec", default="auto", help="'auto' or a file holding an STL formula")
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=3.0)
    p.add_argument("--rho-scale", type=float, default=300.0, help="robustness normalization scale in meters")
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--budget-sims", type=int, help="simulations per plan step (default 2000)")
    budget.add_argument("--budget-ms", type=float, help="wall-clock milliseconds per plan step")
    p.add_argument("--max-steps", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prior", choices=("uniform", "costmap", "replay"), default="costmap")
    p.add_argument("--prior-path", help="replay table for --prior replay")
    p.add_argument("--costmap", help="costmap JSON (default: synthetic demonstrations)")
    p.add_argument("--out", help="directory for trajectory.csv, tree.csv and episode.json")


def _add_suite(sub) -> None:
    p = sub.add_parser("suite", help="run an episode suite from a JSON config")
    p.add_argument("--config", required=True, help="suite config JSON")
    p.add_argument("--out", help="output directory (overrides the config)")


def _add_eval(sub) -> None:
    p = sub.add_parser("eval-stl", help="robustness of a formula on a CSV trace")
    p.add_argument("--formula", required=True, help="formula text, or @path to read it from a file")
    p.add_argument("--trace", required=True, help="CSV with a 't' column and one column per signal")
    p.add_argument("--time-index", type=int, default=0)


def _add_costmap(sub) -> None:
    p = sub.add_parser("make-costmap", help="frequency costmap from trajectory CSVs")
    p.add_argument("--traces-dir", required=True, help="directory of CSVs with x, y, z columns")
    p.add_argument("--grid", required=True, help="JSON object or file: {origin, resolution, dims}")
    p.add_argument("--smooth", type=float, default=0.0, help="Gaussian blur std in cells")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stlmcts", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    _add_plan(sub)
    _add_suite(sub)
    _add_eval(sub)
    _add_costmap(sub)
    return ap


def cmd_plan(args) -> dict:
    planner = PlannerConfig(
        c1=args.c1,
        c2=args.c2,
        budget_sims=None if args.budget_ms is not None else (args.budget_sims or 2000),
        budget_ms=args.budget_ms,
        max_steps=args.max_steps,
        rho_scale=args.rho_scale,
        rng_seed=args.seed,
        record_trees=args.out is not None,
    )
    cfg = SuiteConfig(
        planner=planner, scenario=args.scenario, prior=args.prior, prior_path=args.prior_path, costmap=args.costmap
    )
    deps = build_deps(cfg)
    ep = sample_episode(deps.airspace, np.random.default_rng(args.seed), args.start, args.goal)
    spec, kind = ep.spec, ep.spec_kind
    if args.spec != "auto":
        spec = parse_formula(Path(args.spec).read_text())
    else:
        spec, kind = build_spec(deps.airspace, args.goal)
    res = plan_episode(ep.start_state, args.goal, spec, planner, deps, kind, args.start)
    summary = {
        "start": args.start,
        "goal": args.goal,
        "spec_kind": kind,
        "reached_goal": res.reached_goal,
        "stl_score": res.stl_score,
        "robustness": res.final_robustness,
        "steps": res.steps,
        "actions": res.actions,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(res, out / "trajectory.csv")
        write_tree_csv(res, out / "tree.csv")
        (out / "episode.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def cmd_suite(args) -> dict:
    cfg = SuiteConfig.load(args.config)
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    report = run_suite(cfg)
    print(report.table(), file=sys.stderr)
    return {
        "stl_enabled": report.stl_enabled,
        "success_rate": report.success_rate,
        "stl_score": report.stl_score,
        "episodes": len(report.rows),
        "out_dir": cfg.out_dir,
    }


def cmd_eval(args) -> dict:
    text = Path(args.formula[1:]).read_text() if args.formula.startswith("@") else args.formula
    f = parse_formula(text)
    trace = Trace.from_csv(args.trace)
    return {"robustness": robustness(f, trace, args.time_index)}


def _load_grid(text: str) -> dict:
    p = Path(text)
    d = json.loads(p.read_text() if p.is_file() else text)
    missing = {"origin", "resolution", "dims"} - set(d)
    if missing:
        raise ValueError(f"grid spec lacks {sorted(missing)}")
    return d


def cmd_costmap(args) -> dict:
    grid = _load_grid(args.grid)
    files = sorted(Path(args.traces_dir).glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no CSV traces in {args.traces_dir}")
    traces = [Trace.from_csv(f) for f in files]
    c = build_costmap_from_traces(traces, grid["origin"], grid["resolution"], grid["dims"], args.smooth)
    c.save(args.out)
    return {"out": args.out, "traces": len(traces), "dims": list(c.dims), "nonzero_cells": int(np.count_nonzero(c.values))}


COMMANDS = {"plan": cmd_plan, "suite": cmd_suite, "eval-stl": cmd_eval, "make-costmap": cmd_costmap}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = COMMANDS[args.command](args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
