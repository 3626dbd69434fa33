"""Online selection of branching actions: Gaussian Thompson sampling and UCB2.

Rewards are costs (lower is better): both algorithms aim for the arm with the
smallest mean score.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bnb import BASELINE, Action, SearchParams, SolverError, solve
from .influence import InfluenceModel
from .report import SeriesRun, failure_record, weighted_objective

log = logging.getLogger(__name__)

OBS_SIGMA = 0.2
PRIOR_MEAN = 1.0
PRIOR_STD = 1.0
UCB2_ALPHA = 0.1
CS_EPS = 1e-12

DEFAULT_ACTIONS = (
    Action(InfluenceModel.COUNT, 1),
    Action(InfluenceModel.COUNT, 5),
    Action(InfluenceModel.COUNTDUAL, 2),
    Action(InfluenceModel.BINARY, 3),
    Action(InfluenceModel.DUAL, 3),
)


@dataclass(frozen=True)
class ActionSet:
    actions: tuple = DEFAULT_ACTIONS
    baseline: Action = BASELINE

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if not self.actions:
            raise ValueError("action set is empty")
        if len(set(self.actions)) != len(self.actions):
            raise ValueError("duplicate actions")

    def __len__(self):
        return len(self.actions)

    def __getitem__(self, i):
        return self.actions[i]

    @property
    def labels(self):
        return [a.label for a in self.actions]


# ---------------------------------------------------------------------------
# Thompson sampling
# ---------------------------------------------------------------------------

def posterior_update(mean: float, var: float, reward: float, sigma: float = OBS_SIGMA):
    """Conjugate normal update with known observation std; returns (mean, var)."""
    obs_prec = 1.0 / (sigma * sigma)
    prec = 1.0 / var + obs_prec
    return (mean / var + reward * obs_prec) / prec, 1.0 / prec


def posterior_update_batch(mean: float, var: float, rewards, sigma: float = OBS_SIGMA):
    rewards = np.asarray(rewards, dtype=float)
    obs_prec = 1.0 / (sigma * sigma)
    prec = 1.0 / var + len(rewards) * obs_prec
    return (mean / var + rewards.sum() * obs_prec) / prec, 1.0 / prec


class ThompsonSampler:
    def __init__(self, n_arms: int, sigma: float = OBS_SIGMA, prior_mean: float = PRIOR_MEAN,
                 prior_std: float = PRIOR_STD, seed=None):
        if n_arms < 1:
            raise ValueError("need at least one arm")
        self.sigma = sigma
        self.mean = np.full(n_arms, float(prior_mean))
        self.var = np.full(n_arms, float(prior_std) ** 2)
        self.pulls = np.zeros(n_arms, dtype=int)
        self.rng = np.random.default_rng(seed)

    @property
    def n_arms(self) -> int:
        return len(self.mean)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    def select(self) -> int:
        z = self.rng.standard_normal(self.n_arms)
        return int(np.argmin(self.mean + np.sqrt(self.var) * z))

    def update(self, arm: int, reward: float) -> None:
        if not math.isfinite(reward):
            raise ValueError("reward must be finite")
        self.mean[arm], self.var[arm] = posterior_update(
            self.mean[arm], self.var[arm], reward, self.sigma)
        self.pulls[arm] += 1


# ---------------------------------------------------------------------------
# UCB2
# ---------------------------------------------------------------------------

def tau(r: int, alpha: float = UCB2_ALPHA) -> int:
    return math.ceil((1.0 + alpha) ** r)


def ucb2_bonus(n: int, r: int, alpha: float = UCB2_ALPHA) -> float:
    t = tau(r, alpha)
    return math.sqrt((1.0 + alpha) * max(math.log(math.e * n / t), 0.0) / (2.0 * t))


class UCB2:
    """Auer et al.'s UCB2 run on negated rewards, so it hunts for the smallest mean.

    ``select`` commits one play of the current epoch; call ``update`` with the
    observed reward before the next ``select``.
    """

    def __init__(self, n_arms: int, alpha: float = UCB2_ALPHA):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        self.alpha = alpha
        self.counts = np.zeros(n_arms, dtype=int)
        self.sums = np.zeros(n_arms)
        self.epochs = np.zeros(n_arms, dtype=int)
        self.n = 0
        self.current = 0
        self.remaining = 0

    @property
    def n_arms(self) -> int:
        return len(self.counts)

    @property
    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.sums / self.counts

    def select(self) -> int:
        if self.n < self.n_arms:
            return self.n
        while self.remaining == 0:
            best, best_v = 0, -math.inf
            for a in range(self.n_arms):
                v = -self.sums[a] / self.counts[a] + ucb2_bonus(self.n, self.epochs[a], self.alpha)
                if v > best_v:
                    best, best_v = a, v
            self.current = best
            self.remaining = tau(self.epochs[best] + 1, self.alpha) - tau(self.epochs[best], self.alpha)
            self.epochs[best] += 1
        self.remaining -= 1
        return self.current

    def update(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward
        self.n += 1


def make_bandit(algo: str, n_arms: int, seed=None, sigma: float = OBS_SIGMA,
                alpha: float = UCB2_ALPHA, prior_mean: float = PRIOR_MEAN,
                prior_std: float = PRIOR_STD):
    if algo == "thompson":
        return ThompsonSampler(n_arms, sigma, prior_mean, prior_std, seed)
    if algo == "ucb2":
        return UCB2(n_arms, alpha)
    raise ValueError(f"unknown bandit {algo!r}")


# ---------------------------------------------------------------------------
# Recorded rewards and offline replay
# ---------------------------------------------------------------------------

class RewardTableError(ValueError):
    pass


@dataclass(eq=False)
class RewardTable:
    """Scores f[i, a] for every instance i and arm a, plus the baseline column."""

    scores: np.ndarray
    baseline: np.ndarray
    instances: list = field(default_factory=list)
    arms: list = field(default_factory=list)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        self.baseline = np.asarray(self.baseline, dtype=float)
        if self.scores.ndim != 2 or self.scores.shape[0] != len(self.baseline):
            raise RewardTableError("scores must be (instances x arms) matching the baseline")
        if self.scores.shape[0] == 0 or self.scores.shape[1] == 0:
            raise RewardTableError("reward table is empty")
        if not (np.all(np.isfinite(self.scores)) and np.all(np.isfinite(self.baseline))):
            raise RewardTableError("reward table entries must be finite")
        if np.any(self.scores < 0) or np.any(self.baseline < 0):
            raise RewardTableError("reward table entries must be non-negative")
        if not self.instances:
            self.instances = [str(i + 1) for i in range(self.n_instances)]
        if not self.arms:
            self.arms = [f"arm_{a}" for a in range(self.n_arms)]

    @property
    def n_instances(self) -> int:
        return self.scores.shape[0]

    @property
    def n_arms(self) -> int:
        return self.scores.shape[1]

    def best_arm(self) -> int:
        """Arm with the smallest mean score over the table (lowest index on ties)."""
        return int(np.argmin(self.scores.mean(axis=0)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance", *self.arms, "baseline"])
        for name, row, b in zip(self.instances, self.scores, self.baseline):
            w.writerow([name, *(repr(float(v)) for v in row), repr(float(b))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RewardTable":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise RewardTableError("row 1: empty file")
        header = [h.strip() for h in rows[0]]
        if len(header) < 3 or header[0] != "instance" or header[-1] != "baseline":
            raise RewardTableError("row 1: header must be instance,<arms...>,baseline")
        arms = header[1:-1]
        names, scores, base = [], [], []
        for r, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise RewardTableError(f"row {r}: expected {len(header)} columns, got {len(row)}")
            vals = []
            for col, cell in enumerate(row[1:], start=2):
                try:
                    v = float(cell)
                except ValueError:
                    raise RewardTableError(f"row {r}, column {col} ({header[col - 1]}): "
                                           f"not a number: {cell!r}") from None
                if not math.isfinite(v) or v < 0:
                    raise RewardTableError(f"row {r}, column {col} ({header[col - 1]}): "
                                           f"expected a finite non-negative score, got {cell!r}")
                vals.append(v)
            names.append(row[0])
            scores.append(vals[:-1])
            base.append(vals[-1])
        if not names:
            raise RewardTableError("no data rows")
        return cls(np.array(scores), np.array(base), names, arms)


def synthetic_table(arm_means, baseline_mean, sigma=OBS_SIGMA, n_instances=50, seed=0,
                    arms=None, exact_means=True) -> RewardTable:
    """Gaussian scores per (instance, arm) with std ``sigma``, clipped at zero.

    With ``exact_means`` each column's noise is re-centred so the table's
    column means equal the requested means (up to the rare clipped entry).
    """
    rng = np.random.default_rng(seed)
    means = np.asarray(arm_means, dtype=float)
    noise = sigma * rng.standard_normal((n_instances, len(means)))
    base_noise = sigma * rng.standard_normal(n_instances)
    if exact_means:
        noise -= noise.mean(axis=0)
        base_noise -= base_noise.mean()
    scores = means + noise
    base = baseline_mean + base_noise
    return RewardTable(np.maximum(scores, 0.0), np.maximum(base, 0.0), arms=list(arms or []))


def cs_denominator(table: RewardTable, order=None) -> float:
    idx = np.arange(table.n_instances) if order is None else np.asarray(order)
    a_star = table.best_arm()
    return float(np.sum(table.scores[idx, a_star] - table.baseline[idx]))


def convergence_score(arms, table: RewardTable, order=None) -> float:
    """Realized speedup over the baseline divided by the oracle's; NaN when undefined.

    ``arms[t]`` is the arm played on instance ``order[t]`` (default: step t).
    """
    arms = np.asarray(arms, dtype=int)
    order = np.arange(len(arms)) if order is None else np.asarray(order, dtype=int)
    den = cs_denominator(table, order)
    if abs(den) < CS_EPS:
        return math.nan
    num = float(np.sum(table.scores[order, arms] - table.baseline[order]))
    return num / den


@dataclass
class ReplayReport:
    algo: str
    runs: int
    seed: int
    mean_cs: float
    per_step_histograms: np.ndarray  # steps x arms, counts over runs
    optimal_arm: int
    cs: np.ndarray = field(repr=False, default=None)

    @property
    def final_distribution(self) -> np.ndarray:
        return self.per_step_histograms[-1] / self.runs

    @property
    def final_optimal_frequency(self) -> float:
        return float(self.final_distribution[self.optimal_arm])

    def to_dict(self) -> dict:
        return {
            "algo": self.algo,
            "mean_cs": None if math.isnan(self.mean_cs) else self.mean_cs,
            "per_step_histograms": self.per_step_histograms.astype(int).tolist(),
            "optimal_arm": self.optimal_arm,
            "final_optimal_frequency": self.final_optimal_frequency,
            "runs": self.runs,
            "seed": self.seed,
        }

    def histogram_csv(self, arms=None) -> str:
        arms = arms or [f"arm_{a}" for a in range(self.per_step_histograms.shape[1])]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", *arms])
        for t, row in enumerate(self.per_step_histograms.astype(int), start=1):
            w.writerow([t, *row.tolist()])
        return buf.getvalue()


def replay(table: RewardTable, algo: str = "thompson", runs: int = 10_000, seed: int = 0,
           sigma: float = OBS_SIGMA, alpha: float = UCB2_ALPHA, prior_mean: float = PRIOR_MEAN,
           prior_std: float = PRIOR_STD, chunk: int = 2000) -> ReplayReport:
    """Run the bandit ``runs`` times over shuffled copies of the recorded series."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if algo not in ("thompson", "ucb2"):
        raise ValueError(f"unknown bandit {algo!r}")
    steps, k = table.n_instances, table.n_arms
    scores = np.ascontiguousarray(table.scores)
    base = np.ascontiguousarray(table.baseline)
    rng = np.random.default_rng(seed)
    hist = np.zeros((steps, k), dtype=np.int64)
    gains_all = np.empty(runs)
    done = 0
    while done < runs:
        r = min(chunk, runs - done)
        perms = rng.permuted(np.tile(np.arange(steps, dtype=np.int64), (r, 1)), axis=1)
        choices = np.empty((r, steps), dtype=np.int64)
        gains = np.empty(r)
        if algo == "thompson":
            z = rng.standard_normal((r, steps, k))
            kernels.thompson_replay(scores, base, perms, z, float(prior_mean), float(prior_std),
                                    float(sigma), choices, gains)
        else:
            kernels.ucb2_replay(scores, base, perms, float(alpha), choices, gains)
        for t in range(steps):
            hist[t] += np.bincount(choices[:, t], minlength=k)
        gains_all[done:done + r] = gains
        done += r
    den = cs_denominator(table)
    cs = np.full(runs, math.nan) if abs(den) < CS_EPS else gains_all / den
    mean_cs = math.nan if abs(den) < CS_EPS else float(cs.mean())
    return ReplayReport(algo, runs, seed, mean_cs, hist, table.best_arm(), cs)


# ---------------------------------------------------------------------------
# Online run over a live series
# ---------------------------------------------------------------------------

def run_series_online(series, algo: str = "thompson", action_set: ActionSet | None = None,
                      params: SearchParams | None = None, seed: int = 0,
                      sigma: float = OBS_SIGMA, alpha: float = UCB2_ALPHA,
                      baseline_f=None, names=None) -> SeriesRun:
    """Select an action per instance, solve, feed the score back to the bandit."""
    if not series:
        raise ValueError("empty series")
    action_set = action_set or ActionSet()
    params = params or SearchParams()
    bandit = make_bandit(algo, len(action_set), seed=seed, sigma=sigma, alpha=alpha)
    records, trajectory = [], []
    for i, inst in enumerate(series, start=1):
        arm = bandit.select()
        action = action_set[arm]
        name = names[i - 1] if names else inst.name
        try:
            rec = solve(inst, action, params).record()
            rec["instance"] = name
        except (SolverError, ValueError, ArithmeticError) as exc:
            log.warning("instance %s failed under %s: %s", name, action.label, exc)
            rec = failure_record(name, action.label, str(exc))
        rec["index"] = i
        rec["arm"] = arm
        if baseline_f is not None:
            rec["baseline_f"] = float(baseline_f[i - 1])
            rec["speedup"] = rec["f"] - rec["baseline_f"]
        bandit.update(arm, rec["f"])
        records.append(rec)
        trajectory.append(arm)
    return SeriesRun(
        seed=seed,
        records=records,
        trajectory=trajectory,
        weighted_objective=weighted_objective([r["f"] for r in records]),
    )
