"""Command-line entry point: generate, run, compare, dump-graph."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .graph import build_graph, write_edge_list
from .model import PerturbationConfig, Scenario, load_scenario, save_scenario
from .scenario_gen import GenParams, generate
from .sim import SCHEDULERS, InvariantViolation, SchedulerConfig, Simulation, run_episode, write_epoch_csv, write_summary
from .weights import cost_tables

OUT_ENV = "CROWDSCHED_OUT"

DEFAULT_RANGES = {
    "wind": (0.1, 0.4),
    "comms_cost": (0.1, 0.5),
    "failure_prob": (0.01, 0.05),
    "match_loss_prob": (0.05, 0.10),
}


@dataclass
class RunConfig:
    scenario: Path
    schedulers: Sequence[str]
    seeds: Sequence[int]
    weight_mode: Optional[str] = None
    perturbations: dict = field(default_factory=dict)
    out_dir: Path = Path("results")
    trace: bool = False

    def __post_init__(self):
        bad = [s for s in self.schedulers if s not in SCHEDULERS]
        if bad:
            raise ValueError(f"unknown scheduler(s) {', '.join(bad)}; choose from {', '.join(SCHEDULERS)}")
        if not self.seeds:
            raise ValueError("at least one seed is required")


# -- argument parsing helpers -------------------------------------------------


def _pair(text: str, sep: str) -> tuple:
    parts = text.split(sep)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two values separated by {sep!r}, got {text!r}")
    return float(parts[0]), float(parts[1])


def _area(text: str) -> tuple:
    w, h = _pair(text.lower(), "x")
    return int(w), int(h)


def _agents(text: str) -> tuple:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("agents must be workers,uavs,vehicles")
    return tuple(parts)


def _value(text: str):
    """A fixed number or an inclusive ``low,high`` range."""
    if "," in text:
        return _pair(text, ",")
    return float(text)


def _online(text: str):
    return None if text.lower() in ("full", "none") else float(text)


def _seeds(text: str) -> list:
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _range_flag(text: str):
    return _pair(text, ",")


def _out_dir(arg: Optional[str]) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "results")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", type=Path, help="scenario JSON file")
    p.add_argument("--seeds", type=_seeds, default=[0], help="e.g. 0,1,2 or 0-4 (default 0)")
    p.add_argument("--weights", choices=("hierarchical", "uniform"), default=None,
                   help="override the scenario's weight mode")
    for name, rng in DEFAULT_RANGES.items():
        flag = "--" + name.replace("_", "-")
        p.add_argument(flag, nargs="?", const=rng, default=None, type=_range_flag, metavar="LO,HI",
                       help=f"enable this perturbation (default range {rng[0]},{rng[1]})")
    p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_ENV} or ./results)")
    p.add_argument("--trace", action="store_true", help="write the per-round mpq trace log")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crowdsched", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random scenario file")
    d = GenParams()
    g.add_argument("--area", type=_area, default=d.area, help="WxH, e.g. 30x30")
    g.add_argument("--tasks", type=int, default=d.tasks_n)
    g.add_argument("--charges", type=int, default=d.charges_n)
    g.add_argument("--agents", type=_agents, default=d.agents, help="workers,uavs,vehicles")
    g.add_argument("--online", type=_online, default=d.online_minutes, help="minutes online, or 'full'")
    g.add_argument("--task-cost", type=_value, default=d.task_cost, help="value or low,high")
    g.add_argument("--charge-power", type=_value, default=d.charge_power, help="value or low,high")
    g.add_argument("--interval", type=float, default=d.interval)
    g.add_argument("--limit-time", type=float, default=d.limit_time)
    g.add_argument("--weights", choices=("hierarchical", "uniform"), default=d.weight_mode)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", type=Path, required=True)

    r = sub.add_parser("run", help="run episodes with one scheduler")
    _add_run_flags(r)
    r.add_argument("--scheduler", default="mpq", help=f"one of {', '.join(SCHEDULERS)}")

    c = sub.add_parser("compare", help="run several schedulers on the same scenario and seeds")
    _add_run_flags(c)
    c.add_argument("--schedulers", default="mpq,ils,greedy,kwta", help="comma-separated list")

    dg = sub.add_parser("dump-graph", help="export one epoch's conflict graph")
    dg.add_argument("scenario", type=Path)
    dg.add_argument("--at", type=float, default=None,
                    help="epoch time in minutes (default: first epoch with online agents)")
    dg.add_argument("--weights", choices=("hierarchical", "uniform"), default=None)
    dg.add_argument("--max-edges", type=int, default=2_000_000,
                    help="refuse to write more edges than this (default 2e6)")
    dg.add_argument("-o", "--output", type=Path, required=True)
    return ap


# -- commands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    params = GenParams(area=args.area, tasks_n=args.tasks, charges_n=args.charges, agents=args.agents,
                       online_minutes=args.online, task_cost=args.task_cost, charge_power=args.charge_power,
                       interval=args.interval, limit_time=args.limit_time, seed=args.seed,
                       weight_mode=args.weights)
    try:
        s = generate(params)
    except ValueError as exc:
        print(f"error: invalid parameters: {exc}", file=sys.stderr)
        return 2
    args.output.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(s, args.output)
    print(f"wrote {args.output}: area {s.area[0]:g}x{s.area[1]:g}, {len(s.tasks)} tasks, {len(s.charges)} charges, "
          f"{len(s.workers)} workers, {len(s.uavs)} uavs, {len(s.vehicles)} vehicles, seed {s.seed}")
    return 0


def _scenario_for(cfg: RunConfig) -> Scenario:
    s = load_scenario(cfg.scenario)
    if cfg.perturbations:
        s = dataclasses.replace(s, perturbations=PerturbationConfig(**cfg.perturbations))
    return s


def _config(args, schedulers) -> RunConfig:
    pert = {k: getattr(args, k) for k in DEFAULT_RANGES if getattr(args, k) is not None}
    return RunConfig(scenario=args.scenario, schedulers=schedulers, seeds=args.seeds, weight_mode=args.weights,
                     perturbations=pert, out_dir=_out_dir(args.out_dir), trace=args.trace)


def execute(cfg: RunConfig) -> dict:
    """Run every scheduler over every seed; returns scheduler -> summary."""
    s = _scenario_for(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out = {}
    for name in cfg.schedulers:
        results = []
        for seed in cfg.seeds:
            trace = cfg.out_dir / f"{name}_seed{seed}_trace.jsonl" if cfg.trace and name == "mpq" else None
            if trace is not None and trace.exists():
                trace.unlink()
            sc = SchedulerConfig(weight_mode=cfg.weight_mode, trace_path=trace)
            res = run_episode(s, name, seed, sc)
            write_epoch_csv(res, cfg.out_dir / f"{name}_seed{seed}.csv")
            results.append(res)
        out[name] = write_summary(results, cfg.out_dir / f"{name}_summary.json")
    return out


def _print_table(summaries: dict) -> None:
    print(f"{'scheduler':<10} {'rate':>7} {'std':>7} {'mean_ms':>10} {'max_ms':>10}")
    for name, s in summaries.items():
        print(f"{name:<10} {s['completion_rate']:>7.4f} {s['completion_rate_std']:>7.4f} "
              f"{s['mean_decision_ms']:>10.2f} {s['max_decision_ms']:>10.2f}")


def cmd_run(args) -> int:
    try:
        cfg = _config(args, [args.scheduler])
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summaries = execute(cfg)
    _print_table(summaries)
    return 0


def cmd_compare(args) -> int:
    try:
        cfg = _config(args, [s.strip() for s in args.schedulers.split(",") if s.strip()])
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summaries = execute(cfg)
    with (cfg.out_dir / "compare.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scheduler", "completion_rate", "completion_rate_std", "mean_decision_ms", "max_decision_ms"])
        for name, s in summaries.items():
            wr.writerow([name, f"{s['completion_rate']:.6f}", f"{s['completion_rate_std']:.6f}",
                         f"{s['mean_decision_ms']:.3f}", f"{s['max_decision_ms']:.3f}"])
    _print_table(summaries)
    return 0


def cmd_dump_graph(args) -> int:
    s = load_scenario(args.scenario)
    sim = Simulation(s)
    if args.at is not None:
        times = [args.at]
    else:
        times = list(np.arange(0.0, s.limit_time, s.interval))
    for t in times:
        snap = sim.snapshot(float(t))
        if args.at is not None or snap.uavs or snap.workers or snap.vehicles:
            break
    g = build_graph(snap, cost_tables(snap), args.weights or s.weight_mode)
    indptr = g.csr[0]
    sizes = np.diff(indptr)
    bound = int((sizes * (sizes - 1) // 2).sum())
    if bound > args.max_edges:
        print(f"error: graph at t={snap.now:g} has up to {bound} edges (> --max-edges {args.max_edges})",
              file=sys.stderr)
        return 2
    args.output.parent.mkdir(parents=True, exist_ok=True)
    write_edge_list(g, args.output)
    print(f"wrote {args.output}: t={snap.now:g}, {len(g)} nodes")
    return 0


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "compare": cmd_compare, "dump-graph": cmd_dump_graph}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
