"""Influence graphs over the variables of a MIP and the branching score built on them."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .instance import MipInstance
from .lp import LpSolution

DUAL_ZERO_TOL = 1e-9


class InfluenceModel(str, enum.Enum):
    COUNT = "count"
    BINARY = "binary"
    DUAL = "dual"
    COUNTDUAL = "countdual"
    AUXILIARY = "auxiliary"
    ADVERSARIAL = "adversarial"

    @property
    def needs_lp(self) -> bool:
        return self not in (InfluenceModel.COUNT, InfluenceModel.BINARY)

    @property
    def code(self) -> int:
        return _CODES[self]


_CODES = {
    InfluenceModel.COUNT: kernels.COUNT,
    InfluenceModel.BINARY: kernels.BINARY,
    InfluenceModel.DUAL: kernels.DUAL,
    InfluenceModel.COUNTDUAL: kernels.COUNTDUAL,
    InfluenceModel.AUXILIARY: kernels.AUXILIARY,
    InfluenceModel.ADVERSARIAL: kernels.ADVERSARIAL,
}


@dataclass(frozen=True, eq=False)
class NormalizedInstance:
    """Rescaled copies of ``c`` and ``A``; the source instance is untouched."""

    source: MipInstance
    objective: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def m(self) -> int:
        return self.source.m


@dataclass(frozen=True, eq=False)
class InfluenceGraph:
    n: int
    W: sp.csr_matrix
    model: InfluenceModel

    def dense(self) -> np.ndarray:
        return self.W.toarray()


def row_offsets(inst: MipInstance) -> np.ndarray:
    """b_k: finite upper bound minus finite lower bound of each row."""
    up = np.where(np.isfinite(inst.row_upper), inst.row_upper, 0.0)
    lo = np.where(np.isfinite(inst.row_lower), inst.row_lower, 0.0)
    return up - lo


def _row_std(A: sp.csr_matrix) -> np.ndarray:
    """Population std of each row taken over all n columns, zeros included."""
    m, n = A.shape
    out = np.zeros(m)
    if n == 0:
        return out
    for k in range(m):
        vals = A.data[A.indptr[k]:A.indptr[k + 1]]
        mean = vals.sum() / n
        ss = np.sum((vals - mean) ** 2) + (n - len(vals)) * mean * mean
        out[k] = math.sqrt(ss / n)
    return out


def normalize(inst: MipInstance) -> NormalizedInstance:
    c = np.array(inst.objective, dtype=float)
    sc = float(np.std(c)) if len(c) else 0.0
    if sc != 0.0:
        c = c / sc
    b = row_offsets(inst)
    sd = _row_std(inst.A)
    scale = np.where(b != 0.0, b, np.where(sd != 0.0, sd, 1.0))
    A = sp.csr_matrix(inst.A, copy=True)
    A.data = A.data / np.repeat(scale, np.diff(A.indptr))
    return NormalizedInstance(inst, c, A, b)


def slack_distance(x, lower, upper) -> np.ndarray:
    """Distance of each x_i to its nearest finite bound; 1 when both are infinite."""
    x = np.asarray(x, dtype=float)
    d_lo = np.where(np.isfinite(lower), x - lower, np.inf)
    d_hi = np.where(np.isfinite(upper), upper - x, np.inf)
    s = np.minimum(d_lo, d_hi)
    return np.where(np.isinf(s), 1.0, np.maximum(s, 0.0))


def _check_lp(model: InfluenceModel, lp: LpSolution | None):
    if model.needs_lp and (lp is None or not lp.optimal):
        raise ValueError(f"influence model {model.value!r} needs an optimal LP solution")


def local_influence(model, norm: NormalizedInstance, l: int, i: int, j: int,
                    lp: LpSolution | None = None, lower=None, upper=None) -> float:
    """Influence of variable ``i`` on ``j`` through row ``l`` (scalar reference)."""
    model = InfluenceModel(model)
    if i == j:
        raise ValueError("local influence is defined for i != j")
    _check_lp(model, lp)
    A = norm.A
    a_li, a_lj = A[l, i], A[l, j]
    ind = float(a_li != 0.0) * float(a_lj != 0.0)
    if ind == 0.0:
        return 0.0
    if model is InfluenceModel.COUNT:
        return 1.0
    if model is InfluenceModel.BINARY:
        col_i = A[:, i].toarray().ravel() != 0.0
        col_j = A[:, j].toarray().ravel() != 0.0
        return 1.0 / float(np.sum(col_i & col_j))
    y_l = float(lp.y[l])
    active = 1.0 if abs(y_l) > DUAL_ZERO_TOL else 0.0
    if model is InfluenceModel.DUAL:
        return abs(y_l)
    if model is InfluenceModel.COUNTDUAL:
        return active
    lo = norm.source.var_lower if lower is None else lower
    hi = norm.source.var_upper if upper is None else upper
    s_i = float(slack_distance(lp.x[i:i + 1], lo[i:i + 1], hi[i:i + 1])[0])
    if model is InfluenceModel.AUXILIARY:
        return s_i * abs(a_li * y_l)
    return s_i * abs(a_li / a_lj) * active


def build_graph(model, norm: NormalizedInstance, lp: LpSolution | None = None,
                lower=None, upper=None) -> InfluenceGraph:
    """Direct influence matrix, accumulated row by row over each row's support pairs."""
    model = InfluenceModel(model)
    _check_lp(model, lp)
    n, m = norm.n, norm.m
    A = norm.A
    if model.needs_lp:
        y = np.ascontiguousarray(lp.y, dtype=float)
        lo = norm.source.var_lower if lower is None else lower
        hi = norm.source.var_upper if upper is None else upper
        s = np.ascontiguousarray(slack_distance(lp.x, lo, hi))
    else:
        y = np.zeros(m)
        s = np.ones(n)
    rows, cols, vals = kernels.influence_pairs(
        A.indptr.astype(np.int64), A.indices.astype(np.int64), np.ascontiguousarray(A.data),
        model.code, y, s, DUAL_ZERO_TOL,
    )
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W.sum_duplicates()
    W.sort_indices()
    if model is InfluenceModel.BINARY:
        # each co-occurring pair contributes 1/cnt from each of its cnt rows
        W.data = W.data / W.data
    return InfluenceGraph(n, W, model)


def total_influence(graph: InfluenceGraph, norm: NormalizedInstance) -> np.ndarray:
    weight = np.sqrt(np.maximum(1.0 + norm.objective, 0.0))
    return weight * np.asarray(graph.W.sum(axis=1)).ravel()


def select_branch_var(scores, candidates) -> int:
    cands = sorted(int(c) for c in candidates)
    if not cands:
        raise ValueError("no branching candidates")
    scores = np.asarray(scores)
    best = cands[0]
    for c in cands[1:]:
        if scores[c] > scores[best]:
            best = c
    return best


def export_graph_csv(graph: InfluenceGraph, path) -> None:
    coo = graph.W.tocoo()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "w"])
        for i, j, v in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
            w.writerow([i, j, repr(v)])
