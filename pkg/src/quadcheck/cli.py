"""Command-line entry point: ``quadcheck <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .harness import EnvSession, EpisodeConfig, report, run_campaign, run_episode, serve, training_config
from .observers import TABLE_COLUMNS, ObserverParams, episode_metrics
from .queries import PRESETS, sample_query
from .stl.ast import Formula
from .stl.evaluator import Evaluator
from .stl.parser import parse
from .stl.trace import Trace


def _episode_config(args) -> EpisodeConfig:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    if args.controller:
        data["controller"] = args.controller
    if args.query_class:
        data["query_class"] = args.query_class
    if args.horizon is not None:
        data["horizon"] = args.horizon
    if args.seed is not None:
        data["seed"] = args.seed
    if args.scenario:
        scenario = dict(data.get("scenario") or {})
        scenario["mode"] = args.scenario
        if args.saturation is not None:
            scenario["saturation_range"] = [args.saturation, args.saturation]
        if args.gust_cap is not None:
            scenario["gust_cap"] = args.gust_cap
        data["scenario"] = scenario
    return EpisodeConfig.from_dict(data)


def _add_episode_args(p):
    p.add_argument("--config", help="episode config JSON")
    p.add_argument("--controller", help="pid1, pid2 or mlp:<weights.json>")
    p.add_argument("--query-class", choices=sorted(PRESETS))
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--scenario", choices=("nominal", "saturation", "wind"))
    p.add_argument("--saturation", type=float, help="fixed motor-1 factor for the saturation scenario")
    p.add_argument("--gust-cap", type=float, help="maximum gust magnitude (m/s)")


def _print_table(rep: dict, out=None):
    w = csv.writer(out or sys.stdout)
    w.writerow(TABLE_COLUMNS)
    w.writerow([f"{rep[c]:.4g}" if not math.isnan(rep[c]) else "nan" for c in TABLE_COLUMNS])


def cmd_simulate(args) -> int:
    config = _episode_config(args)
    ep = run_episode(config)
    if args.out:
        ep.to_csv(args.out)
    metrics = episode_metrics(ep.trace, ObserverParams(), ep.horizon)
    if ep.fault:
        print(f"fault at t={ep.fault['time']}: {ep.fault['message']}", file=sys.stderr)
    summary = metrics.summary()
    summary["plateaus"] = metrics.plateaus
    _print_table(summary)
    return 0


def cmd_evaluate(args) -> int:
    config = _episode_config(args)
    result = run_campaign(config, args.episodes, args.jobs, args.out)
    _print_table(result.report)
    for row in result.failures():
        print(f"episode {row['episode']}: {row['status']}", file=sys.stderr)
    return 0


def cmd_monitor(args) -> int:
    trace = Trace.read_csv(args.trace)
    spec = parse(Path(args.spec).read_text(), signals=trace.names)
    names = args.formula or list(spec)
    unknown = [n for n in names if n not in spec]
    if unknown:
        raise KeyError(f"no definition named {unknown[0]!r}")
    if args.at:
        times = [float(t) for t in args.at.split(",")]
    else:
        times = [float(t) for t in trace.times]
    ev = Evaluator(trace)
    w = csv.writer(sys.stdout)
    w.writerow(["time", "name", "satisfied", "robustness"])
    for t in times:
        for name in names:
            node = spec[name]
            if isinstance(node, Formula):
                w.writerow([repr(t), name, int(ev.sat(node, t)), repr(ev.robust(node, t))])
            else:
                w.writerow([repr(t), name, "", repr(ev.term(node, t))])
    return 0


def cmd_gen_queries(args) -> int:
    rng = np.random.default_rng(args.seed)
    query = sample_query(args.query_class, args.horizon, rng, single_plateau=args.single_plateau)
    if args.out:
        query.to_csv(args.out)
    else:
        trace = query.to_trace()
        w = csv.writer(sys.stdout)
        w.writerow(["time", *trace.names])
        for t, row in zip(trace.times, trace.values):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in row)])
    return 0


def cmd_report(args) -> int:
    out = report(args.run_dir, args.out)
    _print_table(out["table"])
    for bad in out["bad_files"]:
        print(f"skipped {bad['file']}: {bad['error']}", file=sys.stderr)
    return 0


def cmd_env_serve(args) -> int:
    overrides = json.loads(Path(args.config).read_text()) if args.config else {}
    session = EnvSession(training_config(**overrides), observation=args.observation)
    serve(session)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadcheck", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one episode and print its metrics")
    _add_episode_args(p)
    p.add_argument("--out", help="write the episode trace CSV here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="run a seeded evaluation campaign")
    _add_episode_args(p)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="run directory for traces, metrics.csv, report.csv, summary.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("monitor", help="evaluate logic specifications over a trace CSV")
    p.add_argument("--spec", required=True)
    p.add_argument("--trace", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--at", help="comma-separated evaluation times")
    group.add_argument("--grid", action="store_true", help="evaluate at every breakpoint (default)")
    p.add_argument("--formula", action="append", help="definition to report (repeatable)")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("gen-queries", help="sample a query signal")
    p.add_argument("--query-class", choices=sorted(PRESETS), default="medium")
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--single-plateau", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_queries)

    p = sub.add_parser("report", help="rebuild the metrics table and plot data of a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out", help="output directory (default: the run directory)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("env-serve", help="newline-delimited JSON reset/step server on stdin/stdout")
    p.add_argument("--config", help="JSON overrides of the training episode config")
    p.add_argument("--observation", default="dim3", choices=("dim3", "dim7", "dim3+failure", "dim3+wind"))
    p.set_defaults(func=cmd_env_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
