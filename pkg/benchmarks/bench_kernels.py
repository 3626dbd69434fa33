"""Time the numba and pure-numpy builds of each hot kernel side by side.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Both builds are run through the public entry points (solve_lp, build_graph,
replay) by swapping the dispatch names in ``infbranch.kernels``. Compile time
is excluded with one warm-up call per build. Outputs of the two builds are
compared too, so a speedup is never reported for a kernel that disagrees.
"""

import argparse
import time
from contextlib import contextmanager

import numpy as np
import scipy.sparse as sp

from infbranch import _accel, kernels
from infbranch.bandit import replay, synthetic_table
from infbranch.influence import InfluenceModel, build_graph, normalize
from infbranch.instance import MipInstance
from infbranch.lp import solve_lp

BUILDS = {
    "numba": dict(simplex=kernels.simplex_numba, influence_pairs=kernels.pairs_numba,
                  thompson_replay=kernels.thompson_replay_numba,
                  ucb2_replay=kernels.ucb2_replay_numba),
    "numpy": dict(simplex=kernels.simplex_numpy, influence_pairs=kernels.pairs_numpy,
                  thompson_replay=kernels.thompson_replay_numpy,
                  ucb2_replay=kernels.ucb2_replay_numpy),
}


@contextmanager
def build(name):
    saved = {k: getattr(kernels, k) for k in BUILDS[name]}
    for k, fn in BUILDS[name].items():
        setattr(kernels, k, fn)
    try:
        yield
    finally:
        for k, fn in saved.items():
            setattr(kernels, k, fn)


def random_lps(count, n, m, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for t in range(count):
        A = rng.normal(size=(m, n)) * (rng.random((m, n)) < 0.5)
        x0 = rng.uniform(0, 1, n)
        act = A @ x0
        out.append(MipInstance(f"lp{t}", rng.normal(size=n), sp.csr_matrix(A),
                               np.full(m, -np.inf), act + rng.uniform(0, 1, m),
                               np.zeros(n), np.full(n, 2.0), np.zeros(n, bool)))
    return out


def dense_instance(n, m, density, seed=1):
    rng = np.random.default_rng(seed)
    A = rng.uniform(1, 5, size=(m, n)) * (rng.random((m, n)) < density)
    return MipInstance("graph", -rng.uniform(1, 2, n), sp.csr_matrix(A),
                       np.full(m, -np.inf), A.sum(axis=1) / 3,
                       np.zeros(n), np.ones(n), np.ones(n, bool))


def bench_simplex(quick):
    lps = random_lps(10 if quick else 40, 30, 20)

    def run():
        return [solve_lp(p).objective for p in lps]
    return run, lambda a, b: np.allclose(a, b, rtol=0, atol=1e-9)


def bench_pairs(quick):
    inst = dense_instance(150 if quick else 400, 60, 0.3)
    norm = normalize(inst)
    lp = solve_lp(inst)

    def run():
        return [build_graph(m, norm, lp).W for m in (InfluenceModel.COUNT, InfluenceModel.DUAL,
                                                      InfluenceModel.ADVERSARIAL)]
    return run, lambda a, b: all(abs(x - y).max() <= 1e-12 for x, y in zip(a, b))


def bench_replay(algo):
    def make(quick):
        table = synthetic_table([0.857, 0.874, 0.882, 0.90, 0.95], 0.94)
        runs = 2000 if quick else 10_000

        def run():
            return replay(table, algo, runs=runs, seed=0).per_step_histograms
        return run, np.array_equal
    return make


CASES = {
    "simplex (solve_lp)": bench_simplex,
    "influence pairs (build_graph)": bench_pairs,
    "thompson replay": bench_replay("thompson"),
    "ucb2 replay": bench_replay("ucb2"),
}


def timed(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args(argv)

    if kernels.simplex_numba is None:
        raise SystemExit("numba is not importable; nothing to compare against")
    print(f"default backend: {_accel.backend_name()}")
    print(f"{'kernel':32s} {'numba s':>10s} {'numpy s':>10s} {'ratio':>8s}  agree")
    for label, make in CASES.items():
        fn, same = make(args.quick)
        res = {}
        for name in ("numba", "numpy"):
            with build(name):
                fn()  # warm-up, includes jit compile for numba
                res[name] = timed(fn, args.repeat)
        (tn, on), (tp, op) = res["numba"], res["numpy"]
        print(f"{label:32s} {tn:10.4f} {tp:10.4f} {tp / tn:7.1f}x  {bool(same(on, op))}")


if __name__ == "__main__":
    main()
