"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""

import json
import math
import sys
import time
from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

sys.path.insert(0, str(Path(__file__).parent))

from infbranch.bandit import (  # noqa: E402
    DEFAULT_ACTIONS,
    ThompsonSampler,
    posterior_update,
    posterior_update_batch,
    replay,
    synthetic_table,
)
from infbranch.bnb import BASELINE, solve  # noqa: E402
from infbranch.cli import main  # noqa: E402
from infbranch.influence import (  # noqa: E402
    InfluenceModel,
    build_graph,
    normalize,
    select_branch_var,
    total_influence,
)
from infbranch.lp import LpStatus, solve_lp  # noqa: E402
from infbranch.report import weighted_objective  # noqa: E402
from oracles import (  # noqa: E402
    lagrangian_dual_value,
    lattice_optimum,
    naive_W,
    random_instance,
    random_lp,
    random_mip,
    vertex_optimum,
)

RESULTS = []

TABLE_MEANS = [0.857, 0.874, 0.882, 0.90, 0.95]
TABLE_BASELINE = 0.94


def report(number, ok, detail, elapsed=None, limit=None):
    ok = bool(ok) and (limit is None or elapsed <= limit)
    timing = "" if elapsed is None else f" [{elapsed:.1f}s" + (f" / {limit:.0f}s]" if limit else "]")
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}{timing}"
    RESULTS.append(line)
    print(line)
    return ok


def _paper_table():
    return synthetic_table(TABLE_MEANS, TABLE_BASELINE, sigma=0.2, n_instances=50, seed=0)


def test_1_replay_convergence_floor():
    t0 = time.perf_counter()
    rep = replay(_paper_table(), "thompson", runs=10_000, seed=0)
    dt = time.perf_counter() - t0
    ok = report(1, rep.mean_cs >= 0.5,
                f"Thompson mean CS {rep.mean_cs:.4f} over 10000 runs (need >= 0.5)", dt, 60)
    assert ok


def test_2_thompson_beats_ucb2():
    t0 = time.perf_counter()
    table = _paper_table()
    ts = replay(table, "thompson", runs=10_000, seed=0)
    ucb = replay(table, "ucb2", runs=10_000, seed=0)
    dt = time.perf_counter() - t0
    ok = report(2, ts.final_optimal_frequency > ucb.final_optimal_frequency,
                f"final-step optimal-arm frequency Thompson {ts.final_optimal_frequency:.4f}"
                f" vs UCB2 {ucb.final_optimal_frequency:.4f}", dt, 120)
    assert ok


def test_3_bnb_matches_enumeration():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2025)
    actions = (BASELINE,) + DEFAULT_ACTIONS
    worst, mismatches, feasible = 0.0, 0, 0
    for _ in range(100):
        inst = random_mip(rng, max_vars=12, max_rows=10)
        ref = lattice_optimum(inst)
        feasible += ref is not None
        for action in actions:
            r = solve(inst, action)
            if ref is None:
                mismatches += r.status != "Infeasible"
            else:
                err = abs(r.incumbent_value - ref) if r.incumbent_value is not None else math.inf
                worst = max(worst, err)
                mismatches += r.status != "Optimal" or err > 1e-6
    dt = time.perf_counter() - t0
    ok = report(3, mismatches == 0,
                f"100 MIPs ({feasible} feasible) x {len(actions)} actions, "
                f"{mismatches} mismatches, worst error {worst:.1e}", dt, 120)
    assert ok


def test_4_lp_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_obj = worst_dual = worst_cs = 0.0
    bad = 0
    for _ in range(200):
        inst = random_lp(rng)
        sol = solve_lp(inst)
        ref = vertex_optimum(inst)
        if ref is None:
            bad += sol.status is not LpStatus.INFEASIBLE
            continue
        if not sol.optimal:
            bad += 1
            continue
        worst_obj = max(worst_obj, abs(sol.objective - ref))
        worst_dual = max(worst_dual, abs(lagrangian_dual_value(inst, sol.y) - sol.objective))
        act = inst.A @ sol.x
        # complementary slackness: y_k (a_k x - bound it points at) and d_j (x_j - bound)
        for k, yk in enumerate(sol.y):
            if yk != 0:
                bound = inst.row_upper[k] if yk > 0 else inst.row_lower[k]
                worst_cs = max(worst_cs, abs(yk * (act[k] - bound)))
        d = inst.objective + inst.A.T @ sol.y
        for j, dj in enumerate(d):
            if abs(dj) > 1e-12:
                bound = inst.var_lower[j] if dj > 0 else inst.var_upper[j]
                worst_cs = max(worst_cs, abs(dj * (sol.x[j] - bound)))
    dt = time.perf_counter() - t0
    ok = bad == 0 and worst_obj <= 1e-6 and worst_dual <= 1e-6 and worst_cs <= 1e-6
    ok = report(4, ok, f"200 LPs, {bad} status errors, max |obj - vertex| {worst_obj:.1e}, "
                f"max duality gap {worst_dual:.1e}, max slackness {worst_cs:.1e}", dt, 60)
    assert ok


def test_5_rescaling_invariance():
    rng = np.random.default_rng(5)
    failures = []
    worst_c = 0.0
    for trial in range(30):
        inst = random_instance(rng)
        na = normalize(inst)
        for lam in (0.5, 3.0, 100.0):
            for k in range(inst.m):
                A = inst.A.toarray()
                A[k] *= lam
                rl, ru = inst.row_lower.copy(), inst.row_upper.copy()
                rl[k] *= lam
                ru[k] *= lam
                nb = normalize(inst.replace(A=sp.csr_matrix(A), row_lower=rl, row_upper=ru))
                for model in (InfluenceModel.COUNT, InfluenceModel.BINARY):
                    ga, gb = build_graph(model, na), build_graph(model, nb)
                    same = (np.array_equal(ga.W.indptr, gb.W.indptr)
                            and np.array_equal(ga.W.indices, gb.W.indices)
                            and np.array_equal(ga.W.data, gb.W.data))
                    cands = range(inst.n)
                    arg_a = select_branch_var(total_influence(ga, na), cands)
                    arg_b = select_branch_var(total_influence(gb, nb), cands)
                    if not same or arg_a != arg_b:
                        failures.append((trial, lam, k, model.value))
            if np.std(inst.objective) != 0:
                nc = normalize(inst.replace(objective=inst.objective * lam))
                worst_c = max(worst_c, float(np.max(np.abs(nc.objective - na.objective))))
    ok = report(5, not failures and worst_c <= 1e-12,
                f"row scaling by 0.5/3/100: {len(failures)} W or argmax changes; "
                f"max normalized-c drift under c scaling {worst_c:.1e}")
    assert ok


def test_6_streaming_graph_equals_triple_loop():
    rng = np.random.default_rng(6)
    worst = 0.0
    done = 0
    while done < 50:
        inst = random_instance(rng)
        lp = solve_lp(inst)
        if not lp.optimal:
            continue
        norm = normalize(inst)
        for model in InfluenceModel:
            W = build_graph(model, norm, lp).dense()
            ref = naive_W(model, inst, lp)
            scale = np.maximum(np.abs(ref), 1.0)
            worst = max(worst, float(np.max(np.abs(W - ref) / scale, initial=0.0)))
        done += 1
    ok = report(6, worst <= 1e-9,
                f"50 instances (n <= 20) x 6 models, max relative difference {worst:.1e}")
    assert ok


def test_7_conjugate_update():
    rng = np.random.default_rng(7)
    worst = 0.0
    mu, var = posterior_update(1.0, 1.0, 0.8, 0.2)
    worst = max(worst, abs(mu - 21 / 26), abs(var - 1 / 26))
    for _ in range(1000):
        m0, v0, s = rng.normal(), rng.uniform(0.01, 3), rng.uniform(0.05, 1)
        rs = rng.uniform(0, 3, size=int(rng.integers(1, 20)))
        m, v = m0, v0
        for r in rs:
            hand = (m / v + r / s**2) / (1 / v + 1 / s**2), 1 / (1 / v + 1 / s**2)
            m, v = posterior_update(m, v, r, s)
            worst = max(worst, abs(m - hand[0]), abs(v - hand[1]))
        bm, bv = posterior_update_batch(m0, v0, rs, s)
        worst = max(worst, abs(bm - m), abs(bv - v))
    ts = ThompsonSampler(2)
    ts.update(0, 0.8)
    worst = max(worst, abs(ts.mean[0] - 21 / 26))
    ok = report(7, worst <= 1e-12,
                f"hand formula, 21/26 example and batched-vs-sequential, max error {worst:.1e}")
    assert ok


def _knap30():
    return files("infbranch") / "data" / "knap30.mps"


def test_8_run_series_is_deterministic(tmp_path, capsys):
    series = tmp_path / "series"
    assert main(["gen-series", str(_knap30()), "--mode", "combined", "--count", "10",
                 "--seed", "8", "--out", str(series)]) == 0
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        code = main(["run-series", str(series), "--bandit", "thompson", "--seed", "8",
                     "--time-limit", "inf", "--node-limit", "300", "--clock", "nodes",
                     "--with-baseline", "--out", str(out)])
        assert code == 0
        outs.append([(out / f).read_bytes() for f in ("report.json", "records.csv", "batches.csv")])
    capsys.readouterr()
    ok = report(8, outs[0] == outs[1],
                "two run-series invocations with a fixed seed and node limit wrote "
                f"{'identical' if outs[0] == outs[1] else 'different'} report bytes")
    assert ok


def test_9_end_to_end_smoke(tmp_path, capsys):
    t0 = time.perf_counter()
    series = tmp_path / "series"
    out = tmp_path / "run"
    assert main(["gen-series", str(_knap30()), "--mode", "obj", "--count", "20",
                 "--seed", "9", "--out", str(series)]) == 0
    assert main(["run-series", str(series), "--bandit", "thompson", "--seed", "9",
                 "--time-limit", "60", "--with-baseline", "--out", str(out)]) == 0
    capsys.readouterr()
    code = main(["report", str(out / "report.json")])
    table = capsys.readouterr().out
    dt = time.perf_counter() - t0
    rep = json.loads((out / "report.json").read_text())
    windows = [b["window"] for b in rep["batches"]]
    complete = len(windows) == 5 and all(
        all(b[k] is not None and math.isfinite(b[k]) for k in ("f", "reltime", "gap", "nofeas",
                                                               "tree_size", "speedup"))
        for b in rep["batches"])
    wobj = rep["runs"][0]["weighted_objective"]
    weights = sum(1 + 0.1 * i for i in range(1, 21))
    const_ok = all(abs(weighted_objective([c] * 20) - c * weights) <= 1e-12 * max(1, c * weights)
                   for c in (0.0, 0.37, 1.0, 3.0))
    ok = code == 0 and complete and math.isfinite(wobj) and const_ok and "17-20" in table
    ok = report(9, ok, f"20-instance knapsack series, windows {windows}, "
                f"weighted objective {wobj:.4f}, constant-f check {const_ok}", dt, 600)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
