"""Influence branching for MIPs with online (Thompson sampling / UCB2) action selection."""

from .bandit import (
    DEFAULT_ACTIONS,
    ActionSet,
    RewardTable,
    ThompsonSampler,
    UCB2,
    convergence_score,
    replay,
    run_series_online,
)
from .bnb import BASELINE, Action, Score, SearchParams, relative_gap, solve
from .influence import (
    InfluenceModel,
    build_graph,
    local_influence,
    normalize,
    select_branch_var,
    total_influence,
)
from .instance import MipInstance, SeriesSpec, generate_series, parse_mps, write_mps
from .lp import LpSolution, LpStatus, solve_lp

__version__ = "0.1.0"
