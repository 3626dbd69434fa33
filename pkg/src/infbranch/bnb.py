"""Best-bound branch and bound with influence branching near the root."""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .influence import (
    InfluenceModel,
    build_graph,
    normalize,
    select_branch_var,
    total_influence,
)
from .instance import MipInstance
from .lp import LpNumericalError, LpStatus, solve_lp

MAX_DEPTH = 6


class SolverError(RuntimeError):
    """The root LP broke down numerically; no meaningful result exists."""


@dataclass(frozen=True)
class Action:
    """An (influence model, max depth) pair; ``model=None`` is the baseline."""

    model: InfluenceModel | None
    depth: int = 0

    def __post_init__(self):
        if self.model is None:
            if self.depth != 0:
                raise ValueError("the baseline action has depth 0")
        else:
            object.__setattr__(self, "model", InfluenceModel(self.model))
            if not 1 <= self.depth <= MAX_DEPTH:
                raise ValueError(f"max depth must lie in [1, {MAX_DEPTH}], got {self.depth}")

    @property
    def is_baseline(self) -> bool:
        return self.model is None

    @property
    def label(self) -> str:
        return "baseline" if self.model is None else f"{self.model.value}:{self.depth}"

    @classmethod
    def make(cls, model, depth: int) -> "Action":
        """Normalize CLI-style input: model 'baseline' or depth 0 give the baseline."""
        if model in (None, "baseline") or depth == 0:
            return BASELINE
        return cls(InfluenceModel(model), int(depth))

    @classmethod
    def parse(cls, label: str) -> "Action":
        if label == "baseline":
            return BASELINE
        model, _, depth = label.partition(":")
        return cls(InfluenceModel(model), int(depth))

    def __str__(self):
        return self.label


BASELINE = Action(None, 0)


@dataclass(frozen=True)
class SearchParams:
    time_limit: float = math.inf
    node_limit: int | None = None
    int_tol: float = 1e-6
    gap_tol: float = 1e-6
    seed: int = 0
    clock: str = "wall"  # "nodes": reltime counts processed nodes against node_limit

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be at least 1")
        if self.clock not in ("wall", "nodes"):
            raise ValueError("clock must be 'wall' or 'nodes'")
        if self.clock == "nodes" and self.node_limit is None:
            raise ValueError("the nodes clock needs a node_limit")


@dataclass(frozen=True)
class Score:
    reltime: float
    gap: float
    nofeas: int
    tree_size: int

    @property
    def f(self) -> float:
        return self.reltime + self.gap + self.nofeas


@dataclass
class SolveResult:
    instance: str
    action: Action
    status: str
    score: Score
    incumbent: np.ndarray | None
    incumbent_value: float | None
    dual_bound: float
    elapsed: float
    lp_failures: int = 0
    history: list = field(default_factory=list, repr=False)

    def record(self) -> dict:
        s = self.score
        return {
            "instance": self.instance,
            "action": self.action.label,
            "reltime": s.reltime,
            "gap": s.gap,
            "nofeas": s.nofeas,
            "tree_size": s.tree_size,
            "f": s.f,
            "status": self.status,
            "incumbent_value": self.incumbent_value,
            "lp_failures": self.lp_failures,
        }


def relative_gap(primal, dual_bound) -> float:
    if primal is None:
        return 1.0
    denom = max(abs(primal), abs(dual_bound), 1e-10)
    return min(max(abs(primal - dual_bound) / denom, 0.0), 1.0)


def most_fractional(x, candidates) -> int:
    """Candidate whose value is furthest from an integer; lowest index on ties."""
    best, best_frac = -1, -1.0
    for j in sorted(candidates):
        f = x[j] - math.floor(x[j])
        frac = min(f, 1.0 - f)
        if frac > best_frac:
            best, best_frac = j, frac
    return best


class _Brancher:
    """Picks the branching variable for a node; caches the static graph scores."""

    def __init__(self, inst: MipInstance, action: Action):
        self.action = action
        self.norm = None
        self.static_scores = None
        if not action.is_baseline:
            self.norm = normalize(inst)
            if not action.model.needs_lp:
                graph = build_graph(action.model, self.norm)
                self.static_scores = total_influence(graph, self.norm)

    def choose(self, depth, lp, lower, upper, candidates) -> int:
        a = self.action
        if a.is_baseline or depth > a.depth:
            return most_fractional(lp.x, candidates)
        scores = self.static_scores
        if scores is None:
            graph = build_graph(a.model, self.norm, lp, lower, upper)
            scores = total_influence(graph, self.norm)
        return select_branch_var(scores, candidates)


def solve(inst: MipInstance, action: Action = BASELINE,
          params: SearchParams | None = None) -> SolveResult:
    params = params or SearchParams()
    start = time.monotonic()
    brancher = _Brancher(inst, action)
    integer = np.asarray(inst.integer)
    c = np.asarray(inst.objective)

    heap: list = []
    counter = 0
    tree_size = 0
    lp_failures = 0
    incumbent = None
    inc_value = math.inf
    unbounded = False
    history = []

    def prune_level():
        return inc_value - 1e-9 * max(1.0, abs(inc_value))

    def evaluate(lower, upper, depth):
        nonlocal counter, tree_size, lp_failures, incumbent, inc_value, unbounded
        tree_size += 1
        try:
            lp = solve_lp(inst, lower, upper)
        except LpNumericalError as exc:
            if depth == 0:
                raise SolverError(f"root LP failed: {exc}") from exc
            lp_failures += 1
            return
        if lp.status is LpStatus.UNBOUNDED:
            if depth == 0:
                unbounded = True
            else:
                lp_failures += 1
            return
        if lp.status is not LpStatus.OPTIMAL or lp.objective >= prune_level():
            return
        x = lp.x
        frac = np.nonzero(integer & (np.abs(x - np.round(x)) > params.int_tol))[0]
        if len(frac) == 0:
            xi = np.where(integer, np.round(x), x)
            value = float(c @ xi)
            if value < inc_value:
                incumbent, inc_value = xi, value
                history.append((tree_size, "incumbent", value))
            return
        heapq.heappush(heap, (lp.objective, counter, depth, lower, upper, lp, frac))
        counter += 1

    lower0 = np.array(inst.var_lower, dtype=float)
    upper0 = np.array(inst.var_upper, dtype=float)
    evaluate(lower0, upper0, 0)

    status = None
    while heap and not unbounded:
        bound = heap[0][0]
        if incumbent is not None and (bound >= prune_level()
                                      or relative_gap(inc_value, bound) <= params.gap_tol):
            heap.clear()
            break
        history.append((tree_size, "bound", bound))
        if params.node_limit is not None and tree_size + 2 > params.node_limit:
            status = "NodeLimit"
            break
        if time.monotonic() - start >= params.time_limit:
            status = "TimeLimit"
            break
        bound, _, depth, lower, upper, lp, frac = heapq.heappop(heap)
        j = brancher.choose(depth, lp, lower, upper, frac)
        v = lp.x[j]
        down_upper = upper.copy()
        down_upper[j] = math.floor(v)
        up_lower = lower.copy()
        up_lower[j] = math.ceil(v)
        evaluate(lower, down_upper, depth + 1)
        evaluate(up_lower, upper, depth + 1)

    elapsed = time.monotonic() - start
    if unbounded:
        status = "Unbounded"
    elif status is None:
        status = "Optimal" if incumbent is not None else "Infeasible"

    if status in ("Optimal", "Infeasible"):
        dual_bound = inc_value if incumbent is not None else math.inf
        gap, nofeas = 0.0, 0
    else:
        dual_bound = min(heap[0][0], inc_value) if heap else inc_value
        if status == "Unbounded":
            dual_bound = -math.inf
        nofeas = 0 if incumbent is not None else 1
        gap = relative_gap(inc_value if incumbent is not None else None,
                           dual_bound) if math.isfinite(dual_bound) else 1.0

    if params.clock == "nodes":
        reltime = min(tree_size, params.node_limit) / params.node_limit
    elif math.isinf(params.time_limit):
        reltime = 0.0
    else:
        reltime = min(elapsed, params.time_limit) / params.time_limit

    score = Score(reltime=reltime, gap=gap, nofeas=nofeas, tree_size=tree_size)
    return SolveResult(
        instance=inst.name,
        action=action,
        status=status,
        score=score,
        incumbent=incumbent,
        incumbent_value=None if incumbent is None else inc_value,
        dual_bound=dual_bound,
        elapsed=elapsed,
        lp_failures=lp_failures,
        history=history,
    )
