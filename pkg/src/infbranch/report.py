"""Series reports: per-instance records, five-batch averages, weighted objective."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

BATCHES = 5
METRICS = ("f", "reltime", "gap", "nofeas", "tree_size")
RECORD_FIELDS = ("index", "instance", "arm", "action", "status", "reltime", "gap", "nofeas",
                 "tree_size", "f", "incumbent_value", "baseline_f", "speedup")


def weighted_objective(scores) -> float:
    """Sum of (1 + 0.1 i) f_i with i counted from 1."""
    return float(sum((1.0 + 0.1 * i) * f for i, f in enumerate(scores, start=1)))


def failure_record(instance: str, action: str, error: str) -> dict:
    return {
        "instance": instance, "action": action, "reltime": 1.0, "gap": 1.0, "nofeas": 1,
        "tree_size": 0, "f": 3.0, "status": "Error", "incumbent_value": None,
        "lp_failures": 0, "error": error,
    }


def batch_windows(n: int, parts: int = BATCHES) -> list[tuple[int, int]]:
    """Split 1..n into ``parts`` contiguous windows (1-based inclusive bounds)."""
    out = []
    for chunk in np.array_split(np.arange(1, n + 1), parts):
        if len(chunk):
            out.append((int(chunk[0]), int(chunk[-1])))
    return out


@dataclass
class SeriesRun:
    seed: int
    records: list
    trajectory: list
    weighted_objective: float

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "weighted_objective": self.weighted_objective,
            "trajectory": list(self.trajectory),
            "records": self.records,
        }


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else None


def aggregate(runs: list[dict]) -> dict:
    """Batch and overall summaries computed from per-instance records only."""
    n = len(runs[0]["records"])
    windows = batch_windows(n)
    has_base = all("speedup" in r for run in runs for r in run["records"])
    metrics = METRICS + (("speedup",) if has_base else ())

    def column(metric, lo=1, hi=n):
        return [run["records"][i - 1][metric] for run in runs for i in range(lo, hi + 1)]

    batches = []
    for lo, hi in windows:
        row = {"window": f"{lo}-{hi}"}
        for met in metrics:
            row[met] = _mean(column(met, lo, hi))
        batches.append(row)
    overall = {"window": f"1-{n}"}
    for met in metrics:
        overall[met] = _mean(column(met))

    per_run_f = [float(np.mean([r["f"] for r in run["records"]])) for run in runs]
    per_run_w = [weighted_objective([r["f"] for r in run["records"]]) for run in runs]
    stderr = (float(np.std(per_run_f, ddof=1) / math.sqrt(len(runs)))
              if len(runs) > 1 else None)
    summary = {
        "mean_f": float(np.mean(per_run_f)),
        "stderr_f": stderr,
        "mean_weighted_objective": float(np.mean(per_run_w)),
    }
    if has_base:
        summary["mean_speedup"] = overall["speedup"]
    return {"overall": overall, "batches": batches, "summary": summary}


@dataclass
class SeriesReport:
    series: str
    algo: str
    actions: list
    runs: list = field(default_factory=list)  # list of SeriesRun

    def to_dict(self) -> dict:
        run_dicts = [r.to_dict() for r in self.runs]
        out = {"series": self.series, "algo": self.algo, "actions": list(self.actions),
               "runs": run_dicts}
        out.update(aggregate(run_dicts))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def records_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("run", "seed") + RECORD_FIELDS)
        for k, run in enumerate(self.runs):
            for rec in run.records:
                w.writerow([k, run.seed] + [_cell(rec.get(f)) for f in RECORD_FIELDS])
        return buf.getvalue()

    def batches_csv(self) -> str:
        return batches_csv(self.to_dict())


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _columns(row: dict) -> list[str]:
    # fixed order, so a report read back from sorted JSON prints the same way
    return [k for k in METRICS + ("speedup",) if k in row]


def batches_csv(report: dict) -> str:
    rows = [report["overall"], *report["batches"]]
    cols = _columns(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["window", *cols])
    for row in rows:
        w.writerow([row["window"], *(_cell(row[c]) for c in cols)])
    return buf.getvalue()


def verify(report: dict) -> list[str]:
    """Names of stored aggregates that do not match a recomputation from the records."""
    fresh = aggregate(report["runs"])
    bad = []
    for key in ("overall", "batches", "summary"):
        if json.dumps(fresh[key], sort_keys=True) != json.dumps(report.get(key), sort_keys=True):
            bad.append(key)
    for run in report["runs"]:
        if weighted_objective([r["f"] for r in run["records"]]) != run["weighted_objective"]:
            bad.append(f"weighted_objective[seed={run['seed']}]")
    return bad


def format_table(report: dict) -> str:
    """Plain-text table of overall and per-batch averages."""
    rows = [report["overall"], *report["batches"]]
    cols = _columns(rows[0])
    head = f"{'batch':>8} " + " ".join(f"{c:>10}" for c in cols)
    lines = [head, "-" * len(head)]
    for row in rows:
        lines.append(f"{row['window']:>8} " + " ".join(f"{row[c]:>10.4f}" for c in cols))
    s = report["summary"]
    tail = f"mean f = {s['mean_f']:.4f}"
    if s.get("stderr_f") is not None:
        tail += f" ± {s['stderr_f']:.4f}"
    tail += f"   weighted objective = {s['mean_weighted_objective']:.4f}"
    lines.append(tail)
    return "\n".join(lines)
