"""LP relaxation solver: two-phase bounded-variable primal simplex.

Rows ``b⁻ <= A x <= b⁺`` become ``A x - r = 0`` with bounded row activities
``r``; phase one drives artificial columns to zero, phase two optimizes the
objective from the resulting basis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .instance import MipInstance

FEAS_TOL = 1e-7
DUAL_TOL = 1e-6
PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
BLAND_AFTER = 50


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class LpNumericalError(RuntimeError):
    """The simplex hit its iteration guard; the status is unknown."""


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    objective: float | None = None
    reduced_costs: np.ndarray | None = None
    basis: tuple = ()
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _initial_value(lo, hi):
    if np.isfinite(lo):
        return lo, kernels.AT_LOWER
    if np.isfinite(hi):
        return hi, kernels.AT_UPPER
    return 0.0, kernels.FREE_ZERO


def _solve_no_rows(c, lo, hi):
    x = np.empty(len(c))
    for j, cj in enumerate(c):
        if cj < 0:
            x[j] = hi[j]
        elif cj > 0:
            x[j] = lo[j]
        else:
            x[j] = _initial_value(lo[j], hi[j])[0]
    if not np.all(np.isfinite(x)):
        return LpSolution(LpStatus.UNBOUNDED)
    return LpSolution(LpStatus.OPTIMAL, x=x, y=np.empty(0), objective=float(c @ x),
                      reduced_costs=c.copy())


def solve_lp(inst: MipInstance, lower=None, upper=None) -> LpSolution:
    """Solve the LP relaxation of ``inst`` with optional local variable bounds.

    Duals follow the Lagrangian sign convention: ``y[k] >= 0`` when row ``k``
    is tight at its upper bound, ``<= 0`` at its lower bound.
    """
    n, m = inst.n, inst.m
    lo_x = np.array(inst.var_lower if lower is None else lower, dtype=float)
    hi_x = np.array(inst.var_upper if upper is None else upper, dtype=float)
    if np.any(lo_x > hi_x):
        return LpSolution(LpStatus.INFEASIBLE)
    c = np.asarray(inst.objective, dtype=float)
    if m == 0:
        return _solve_no_rows(c, lo_x, hi_x)

    Ad = inst.A.toarray()
    N = n + 2 * m
    x = np.zeros(N)
    state = np.empty(N, np.int8)
    for j in range(n):
        x[j], state[j] = _initial_value(lo_x[j], hi_x[j])
    activity = Ad @ x[:n]
    rl, ru = inst.row_lower, inst.row_upper

    sign = np.ones(m)
    basis = np.empty(m, np.int64)
    art_hi = np.zeros(m)
    for k in range(m):
        r_col, a_col = n + k, n + m + k
        act = activity[k]
        if rl[k] - FEAS_TOL <= act <= ru[k] + FEAS_TOL:
            basis[k] = r_col
            state[r_col] = kernels.BASIC
            state[a_col] = kernels.AT_LOWER
        else:
            bound = rl[k] if act < rl[k] else ru[k]
            x[r_col] = bound
            state[r_col] = kernels.AT_LOWER if act < rl[k] else kernels.AT_UPPER
            sign[k] = 1.0 if bound - act >= 0 else -1.0
            basis[k] = a_col
            state[a_col] = kernels.BASIC
            art_hi[k] = np.inf

    A_full = np.ascontiguousarray(np.hstack([Ad, -np.eye(m), np.diag(sign)]))
    rhs = np.zeros(m)
    lo = np.concatenate([lo_x, rl, np.zeros(m)])
    hi = np.concatenate([hi_x, ru, art_hi])
    y = np.zeros(m)
    max_iter = 50 * N + 1000
    iters = 0

    if np.any(np.isinf(art_hi)):
        cost1 = np.concatenate([np.zeros(n + m), np.ones(m)])
        status, it = kernels.simplex(A_full, rhs, cost1, lo, hi, basis, state, x, y,
                                     max_iter, BLAND_AFTER, PIVOT_TOL, OPT_TOL)
        iters += it
        if status != kernels.OPTIMAL:
            raise LpNumericalError(f"phase one stopped with status {status}")
        infeas = float(np.sum(x[n + m:]))
        scale = 1.0 + max(np.max(np.abs(np.where(np.isfinite(lo), lo, 0.0))),
                          np.max(np.abs(np.where(np.isfinite(hi), hi, 0.0))))
        if infeas > FEAS_TOL * scale:
            return LpSolution(LpStatus.INFEASIBLE, iterations=iters)
        hi[n + m:] = 0.0
        x[n + m:] = 0.0

    cost2 = np.concatenate([c, np.zeros(2 * m)])
    status, it = kernels.simplex(A_full, rhs, cost2, lo, hi, basis, state, x, y,
                                 max_iter, BLAND_AFTER, PIVOT_TOL, OPT_TOL)
    iters += it
    if status == kernels.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, iterations=iters)
    if status != kernels.OPTIMAL:
        raise LpNumericalError(f"phase two stopped with status {status}")

    xs = x[:n].copy()
    ydual = -y
    # basic row activities are slack rows: their multiplier is zero by definition
    ydual[state[n:n + m] == kernels.BASIC] = 0.0
    # round-off level multipliers would otherwise point at infinite bounds
    noise = OPT_TOL * (1.0 + float(np.max(np.abs(c), initial=0.0)))
    ydual[np.abs(ydual) <= noise] = 0.0
    red = c + Ad.T @ ydual
    red[(state[:n] == kernels.BASIC) | (np.abs(red) <= noise)] = 0.0
    return LpSolution(
        LpStatus.OPTIMAL,
        x=xs,
        y=ydual,
        objective=float(c @ xs),
        reduced_costs=red,
        basis=tuple(int(b) for b in basis),
        iterations=iters,
    )


def dual_objective(inst: MipInstance, sol: LpSolution, lower=None, upper=None,
                   tol: float = 1e-9) -> float:
    """Lagrangian dual value implied by ``sol.y`` and the reduced costs."""
    lo = np.asarray(inst.var_lower if lower is None else lower, dtype=float)
    hi = np.asarray(inst.var_upper if upper is None else upper, dtype=float)
    y = np.where(np.abs(sol.y) > tol, sol.y, 0.0)
    d = np.where(np.abs(sol.reduced_costs) > tol, sol.reduced_costs, 0.0)
    with np.errstate(invalid="ignore"):
        row_bound = np.where(y > 0, inst.row_upper, np.where(y < 0, inst.row_lower, 0.0))
        col_bound = np.where(d > 0, lo, np.where(d < 0, hi, 0.0))
        return float(np.sum(d * col_bound) - np.sum(y * row_bound))
