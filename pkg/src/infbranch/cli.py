"""Command-line front end: solve, gen-series, run-series, replay, report."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bandit import (
    DEFAULT_ACTIONS,
    OBS_SIGMA,
    UCB2_ALPHA,
    ActionSet,
    RewardTable,
    RewardTableError,
    replay,
    run_series_online,
)
from .bnb import BASELINE, Action, SearchParams, SolverError, solve
from .instance import (
    SERIES_MODES,
    MpsError,
    SeriesSpec,
    load_series,
    read_mps,
    write_series,
)
from .report import SeriesReport, batches_csv, format_table, verify

log = logging.getLogger("infbranch")

OUTPUT_ENV = "INFBRANCH_OUTPUT_DIR"
MODELS = ("baseline", "count", "binary", "dual", "countdual", "auxiliary", "adversarial")


class UsageError(Exception):
    pass


def _positive_float(text):
    v = float(text)
    if not v > 0 or math.isnan(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUTPUT_ENV) or "infbranch-out"
    return Path(out)


def _params(args) -> SearchParams:
    try:
        return SearchParams(time_limit=args.time_limit, node_limit=args.node_limit,
                            clock=args.clock, seed=getattr(args, "seed", 0))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require_file(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {p}")
    return p


def _add_search_flags(p, time_required=False):
    p.add_argument("--time-limit", type=_positive_float, required=time_required,
                   default=None if time_required else math.inf,
                   help="seconds per solve ('inf' for none)")
    p.add_argument("--node-limit", type=_positive_int, default=None)
    p.add_argument("--clock", choices=("wall", "nodes"), default="wall",
                   help="'nodes' measures reltime as nodes/node-limit (deterministic)")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    inst = read_mps(_require_file(args.file))
    try:
        action = Action.make(args.model, args.depth)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = solve(inst, action, _params(args))
    print(json.dumps(result.record(), sort_keys=True))
    return 0


def cmd_gen_series(args) -> int:
    base = read_mps(_require_file(args.base))
    try:
        spec = SeriesSpec(base, args.mode, args.count, args.epsilon, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = write_series(spec, _out_dir(args))
    print(out)
    return 0


def _solve_all(instances, action, params, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_score_f, instances,
                                 [action] * len(instances), [params] * len(instances)))
    return [_score_f(inst, action, params) for inst in instances]


def _score_f(inst, action, params):
    try:
        return solve(inst, action, params).score.f
    except SolverError:
        return 3.0


def cmd_run_series(args) -> int:
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise UsageError(f"no such manifest: {manifest}")
    loaded = load_series(manifest)
    names = [name for name, _ in loaded]
    series = [inst for _, inst in loaded]
    params = _params(args)
    actions = ActionSet(tuple(Action.parse(a) for a in args.actions) if args.actions
                        else DEFAULT_ACTIONS)

    base_f = None
    if args.with_baseline or args.record_table:
        base_f = _solve_all(series, BASELINE, params, args.jobs)

    report = SeriesReport(series=manifest.name, algo=args.bandit, actions=actions.labels)
    for r in range(args.repeats):
        run = run_series_online(series, args.bandit, actions, params, seed=args.seed + r,
                                sigma=args.sigma, alpha=args.alpha,
                                baseline_f=base_f if args.with_baseline else None, names=names)
        report.runs.append(run)

    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "records.csv").write_text(report.records_csv())
    (out / "batches.csv").write_text(report.batches_csv())
    if args.record_table:
        cols = [_solve_all(series, a, params, args.jobs) for a in actions.actions]
        table = RewardTable(np.array(cols).T, np.array(base_f), names, actions.labels)
        (out / "reward_table.csv").write_text(table.to_csv())
    print(format_table(report.to_dict()))
    return 0


def cmd_replay(args) -> int:
    path = _require_file(args.rewards)
    try:
        table = RewardTable.from_csv(path.read_text())
    except RewardTableError as exc:
        raise UsageError(f"{path}: {exc}") from None
    rep = replay(table, args.bandit, runs=args.runs, seed=args.seed, sigma=args.sigma,
                 alpha=args.alpha)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "replay.json").write_text(json.dumps(rep.to_dict(), sort_keys=True) + "\n")
    (out / "histograms.csv").write_text(rep.histogram_csv(table.arms))
    cs = "undefined" if math.isnan(rep.mean_cs) else f"{rep.mean_cs:.4f}"
    print(f"{args.bandit}: mean CS {cs} over {rep.runs} runs; "
          f"final-step optimal-arm frequency {rep.final_optimal_frequency:.4f}")
    return 0


def cmd_report(args) -> int:
    path = _require_file(args.report)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None
    bad = verify(data)
    if args.csv:
        sys.stdout.write(batches_csv(data))
    else:
        print(format_table(data))
    if bad:
        print(f"stored aggregates disagree with the records: {', '.join(bad)}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infbranch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one MPS instance with a branching action")
    p.add_argument("file")
    p.add_argument("--model", choices=MODELS, default="baseline")
    p.add_argument("--depth", type=int, default=0)
    _add_search_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen-series", help="write a perturbed series of a base instance")
    p.add_argument("base")
    p.add_argument("--mode", choices=SERIES_MODES, default="obj")
    p.add_argument("--count", type=_positive_int, default=50)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_series)

    p = sub.add_parser("run-series", help="learn the branching action online over a series")
    p.add_argument("manifest")
    p.add_argument("--bandit", choices=("thompson", "ucb2"), default="thompson")
    p.add_argument("--sigma", type=_positive_float, default=OBS_SIGMA)
    p.add_argument("--alpha", type=float, default=UCB2_ALPHA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=_positive_int, default=1)
    p.add_argument("--actions", nargs="+", default=None, metavar="MODEL:DEPTH")
    p.add_argument("--with-baseline", action="store_true")
    p.add_argument("--record-table", action="store_true",
                   help="also solve every action on every instance and write reward_table.csv")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", default=None)
    _add_search_flags(p, time_required=True)
    p.set_defaults(func=cmd_run_series)

    p = sub.add_parser("replay", help="replay a recorded reward table over shuffled runs")
    p.add_argument("--rewards", required=True)
    p.add_argument("--bandit", choices=("thompson", "ucb2"), default="thompson")
    p.add_argument("--runs", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=_positive_float, default=OBS_SIGMA)
    p.add_argument("--alpha", type=float, default=UCB2_ALPHA)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="print and verify a run-series report")
    p.add_argument("report")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, MpsError, FileNotFoundError) as exc:
        print(f"infbranch {args.command}: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ValueError, RuntimeError, OSError) as exc:
        print(f"infbranch {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
