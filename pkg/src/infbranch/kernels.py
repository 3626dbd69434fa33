"""Hot inner loops, each with a numba build and a pure-numpy build.

The public names at the bottom dispatch on ``_accel.USE_NUMBA``. The
``*_numpy`` / ``*_numba`` variants stay importable so the benchmark and the
equivalence tests can run both paths in one process.

Kernels take plain arrays only. Randomness is generated by the caller, so the
two builds of every kernel consume identical inputs and are expected to agree.
"""

import math

import numpy as np

from . import _accel

# ---------------------------------------------------------------------------
# Bounded-variable primal simplex
# ---------------------------------------------------------------------------

BASIC, AT_LOWER, AT_UPPER, FREE_ZERO = 0, 1, 2, 3
OPTIMAL, UNBOUNDED, ITER_LIMIT = 0, 1, 2


def _simplex_py(A, b, cost, lo, hi, basis, state, x, y, max_iter, bland_after,
                pivot_tol, opt_tol):
    """Minimize cost @ x s.t. A x = b, lo <= x <= hi from a given basis.

    ``basis``, ``state`` and ``x`` are updated in place; on OPTIMAL ``y``
    holds the simplex multipliers of the final basis. Returns (status, iters).
    """
    m, N = A.shape
    degenerate = 0
    for it in range(max_iter):
        xn = x.copy()
        for i in range(m):
            xn[basis[i]] = 0.0
        B = np.empty((m, m))
        for i in range(m):
            B[:, i] = A[:, basis[i]]
        xb = np.linalg.solve(B, b - A @ xn)
        cb = np.empty(m)
        for i in range(m):
            x[basis[i]] = xb[i]
            cb[i] = cost[basis[i]]
        yy = np.linalg.solve(np.ascontiguousarray(B.T), cb)
        d = cost - yy @ A

        bland = degenerate >= bland_after
        q = -1
        best = 0.0
        for j in range(N):
            s = state[j]
            if s == BASIC or lo[j] == hi[j]:
                continue
            if s == AT_LOWER:
                gain = -d[j]
            elif s == AT_UPPER:
                gain = d[j]
            else:
                gain = abs(d[j])
            if gain > opt_tol:
                if bland:
                    q = j
                    break
                if gain > best:
                    best = gain
                    q = j
        if q < 0:
            for i in range(m):
                y[i] = yy[i]
            return OPTIMAL, it

        if state[q] == AT_LOWER or (state[q] == FREE_ZERO and d[q] < 0.0):
            direction = 1.0
        else:
            direction = -1.0
        alpha = np.linalg.solve(B, np.ascontiguousarray(A[:, q]))

        t_basic = np.inf
        leave = -1
        leave_state = AT_LOWER
        leave_mag = 0.0
        for i in range(m):
            delta = -direction * alpha[i]
            bi = basis[i]
            if delta < -pivot_tol and lo[bi] > -np.inf:
                t = (x[bi] - lo[bi]) / (-delta)
                to = AT_LOWER
            elif delta > pivot_tol and hi[bi] < np.inf:
                t = (hi[bi] - x[bi]) / delta
                to = AT_UPPER
            else:
                continue
            if t < 0.0:
                t = 0.0
            mag = abs(delta)
            better = False
            if leave < 0 or t < t_basic - 1e-12:
                better = True
            elif t <= t_basic + 1e-12:
                if bland:
                    better = bi < basis[leave]
                else:
                    better = mag > leave_mag
            if better:
                t_basic = min(t, t_basic) if leave >= 0 else t
                leave = i
                leave_state = to
                leave_mag = mag

        flip = hi[q] - lo[q]
        if flip <= t_basic:
            if flip == np.inf:
                return UNBOUNDED, it
            # bound flip, basis unchanged
            if state[q] == AT_LOWER:
                state[q] = AT_UPPER
                x[q] = hi[q]
            else:
                state[q] = AT_LOWER
                x[q] = lo[q]
            degenerate = 0
            continue

        bi = basis[leave]
        state[bi] = leave_state
        x[bi] = lo[bi] if leave_state == AT_LOWER else hi[bi]
        state[q] = BASIC
        basis[leave] = q
        if t_basic <= 1e-12:
            degenerate += 1
        else:
            degenerate = 0
    return ITER_LIMIT, max_iter


simplex_numpy = _simplex_py
simplex_numba = _accel.jit(_simplex_py)

# ---------------------------------------------------------------------------
# Influence pair accumulation
# ---------------------------------------------------------------------------

COUNT, BINARY, DUAL, COUNTDUAL, AUXILIARY, ADVERSARIAL = range(6)


def _pair_weight_src(model, a_i, a_j, y_l, s_i, ytol):
    if model == COUNT or model == BINARY:
        return 1.0
    if model == DUAL:
        return abs(y_l)
    active = 1.0 if abs(y_l) > ytol else 0.0
    if model == COUNTDUAL:
        return active
    if model == AUXILIARY:
        return s_i * abs(a_i * y_l)
    return s_i * abs(a_i / a_j) * active


_pair_weight = _accel.jit(_pair_weight_src) or _pair_weight_src


def _pairs_loop(indptr, indices, data, model, y, s, ytol):
    m = len(indptr) - 1
    total = 0
    for l in range(m):
        k = indptr[l + 1] - indptr[l]
        total += k * (k - 1)
    rows = np.empty(total, np.int64)
    cols = np.empty(total, np.int64)
    vals = np.empty(total, np.float64)
    pos = 0
    for l in range(m):
        lo, hi = indptr[l], indptr[l + 1]
        y_l = y[l]
        for p in range(lo, hi):
            i = indices[p]
            s_i = s[i]
            for q in range(lo, hi):
                if q == p:
                    continue
                rows[pos] = i
                cols[pos] = indices[q]
                vals[pos] = _pair_weight(model, data[p], data[q], y_l, s_i, ytol)
                pos += 1
    return rows, cols, vals


pairs_numba = _accel.jit(_pairs_loop)


def pairs_numpy(indptr, indices, data, model, y, s, ytol):
    """Vectorized per row: every ordered pair (i, j), i != j, of the row support."""
    rows, cols, vals = [], [], []
    for l in range(len(indptr) - 1):
        lo, hi = indptr[l], indptr[l + 1]
        k = hi - lo
        if k < 2:
            continue
        idx = indices[lo:hi]
        a = data[lo:hi]
        p, q = np.nonzero(~np.eye(k, dtype=bool))
        i, j = idx[p], idx[q]
        y_l = y[l]
        if model in (COUNT, BINARY):
            w = np.ones(len(p))
        elif model == DUAL:
            w = np.full(len(p), abs(y_l))
        else:
            active = 1.0 if abs(y_l) > ytol else 0.0
            if model == COUNTDUAL:
                w = np.full(len(p), active)
            elif model == AUXILIARY:
                w = s[i] * np.abs(a[p] * y_l)
            else:
                w = s[i] * np.abs(a[p] / a[q]) * active
        rows.append(i)
        cols.append(j)
        vals.append(w)
    if not rows:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
    return (np.concatenate(rows).astype(np.int64), np.concatenate(cols).astype(np.int64),
            np.concatenate(vals).astype(np.float64))


# ---------------------------------------------------------------------------
# Bandit replay over recorded reward tables
# ---------------------------------------------------------------------------

def _thompson_replay_loop(table, baseline, perms, z, mu0, sd0, sigma, choices, gains):
    runs, steps = perms.shape
    k = table.shape[1]
    obs_prec = 1.0 / (sigma * sigma)
    mu = np.empty(k)
    var = np.empty(k)
    for r in range(runs):
        mu[:] = mu0
        var[:] = sd0 * sd0
        acc = 0.0
        for t in range(steps):
            inst = perms[r, t]
            best = 0
            best_v = np.inf
            for a in range(k):
                v = mu[a] + math.sqrt(var[a]) * z[r, t, a]
                if v < best_v:
                    best_v = v
                    best = a
            reward = table[inst, best]
            prec = 1.0 / var[best] + obs_prec
            mu[best] = (mu[best] / var[best] + reward * obs_prec) / prec
            var[best] = 1.0 / prec
            choices[r, t] = best
            acc += reward - baseline[inst]
        gains[r] = acc


def thompson_replay_numpy(table, baseline, perms, z, mu0, sd0, sigma, choices, gains):
    runs, steps = perms.shape
    k = table.shape[1]
    obs_prec = 1.0 / (sigma * sigma)
    mu = np.full((runs, k), float(mu0))
    var = np.full((runs, k), float(sd0) * float(sd0))
    rix = np.arange(runs)
    acc = np.zeros(runs)
    for t in range(steps):
        inst = perms[:, t]
        best = np.argmin(mu + np.sqrt(var) * z[:, t, :], axis=1)
        reward = table[inst, best]
        v = var[rix, best]
        prec = 1.0 / v + obs_prec
        mu[rix, best] = (mu[rix, best] / v + reward * obs_prec) / prec
        var[rix, best] = 1.0 / prec
        choices[:, t] = best
        acc += reward - baseline[inst]
    gains[:] = acc


thompson_replay_numba = _accel.jit(_thompson_replay_loop)


def _tau_src(r, alpha):
    return math.ceil((1.0 + alpha) ** r)


def _ucb2_bonus_src(n, tau_r, alpha):
    arg = math.log(math.e * n / tau_r)
    if arg < 0.0:
        arg = 0.0
    return math.sqrt((1.0 + alpha) * arg / (2.0 * tau_r))


_tau = _accel.jit(_tau_src) or _tau_src
_ucb2_bonus = _accel.jit(_ucb2_bonus_src) or _ucb2_bonus_src


def _ucb2_replay_loop(table, baseline, perms, alpha, choices, gains):
    runs, steps = perms.shape
    k = table.shape[1]
    counts = np.zeros(k)
    sums = np.zeros(k)
    epochs = np.zeros(k, np.int64)
    for r in range(runs):
        counts[:] = 0.0
        sums[:] = 0.0
        epochs[:] = 0
        n = 0
        current = 0
        remaining = 0
        acc = 0.0
        for t in range(steps):
            if t < k:
                arm = t
            else:
                while remaining == 0:
                    best = 0
                    best_v = -np.inf
                    for a in range(k):
                        v = -sums[a] / counts[a] + _ucb2_bonus(n, _tau(epochs[a], alpha), alpha)
                        if v > best_v:
                            best_v = v
                            best = a
                    current = best
                    remaining = _tau(epochs[best] + 1, alpha) - _tau(epochs[best], alpha)
                    epochs[best] += 1
                arm = current
                remaining -= 1
            inst = perms[r, t]
            reward = table[inst, arm]
            counts[arm] += 1.0
            sums[arm] += reward
            n += 1
            choices[r, t] = arm
            acc += reward - baseline[inst]
        gains[r] = acc


ucb2_replay_numba = _accel.jit(_ucb2_replay_loop)


def ucb2_replay_numpy(table, baseline, perms, alpha, choices, gains):
    """Same state machine as the loop build, vectorized across runs."""
    runs, steps = perms.shape
    k = table.shape[1]
    counts = np.zeros((runs, k))
    sums = np.zeros((runs, k))
    epochs = np.zeros((runs, k), np.int64)
    current = np.zeros(runs, np.int64)
    remaining = np.zeros(runs, np.int64)
    rix = np.arange(runs)
    acc = np.zeros(runs)
    base = 1.0 + alpha
    for t in range(steps):
        if t < k:
            arm = np.full(runs, t, np.int64)
        else:
            need = np.nonzero(remaining == 0)[0]
            n = float(t)
            while len(need):
                tau_r = np.ceil(base ** epochs[need].astype(float))
                arg = np.maximum(np.log(math.e * n / tau_r), 0.0)
                idx = -sums[need] / counts[need] + np.sqrt(base * arg / (2.0 * tau_r))
                best = np.argmax(idx, axis=1)
                e = epochs[need, best]
                length = (np.ceil(base ** (e + 1).astype(float))
                          - np.ceil(base ** e.astype(float))).astype(np.int64)
                epochs[need, best] += 1
                current[need] = best
                remaining[need] = length
                need = need[length == 0]
            arm = current.copy()
            remaining -= 1
        inst = perms[:, t]
        reward = table[inst, arm]
        counts[rix, arm] += 1.0
        sums[rix, arm] += reward
        choices[:, t] = arm
        acc += reward - baseline[inst]
    gains[:] = acc


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

if _accel.USE_NUMBA:
    simplex = simplex_numba
    influence_pairs = pairs_numba
    thompson_replay = thompson_replay_numba
    ucb2_replay = ucb2_replay_numba
else:
    simplex = simplex_numpy
    influence_pairs = pairs_numpy
    thompson_replay = thompson_replay_numpy
    ucb2_replay = ucb2_replay_numpy
