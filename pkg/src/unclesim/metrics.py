"""Revenue and security ratios of one walk."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from unclesim.chain import Miner, uncle_reward
from unclesim.engine import WalkStats


class EmptyWalkError(ValueError):
    """The walk produced no reward-yielding block."""


@dataclass(frozen=True)
class MetricsReport:
    rrr: float
    arr_selfish: float
    arr_honest: float
    rbr: float
    rns: float
    avg_uncle_reward: float
    avg_uncle_distance: float
    observed_gamma: float
    revenue_ratio: float

    def to_dict(self) -> dict:
        return asdict(self)


def arr_full(stats: WalkStats, miner: Miner) -> float:
    """Share of reward-yielding blocks times the party's mean reward per block."""
    own = stats.nb_p_r[miner] + stats.nb_p_u[miner]
    if own == 0:
        return 0.0
    share = own / (stats.nb_a_r + stats.nb_a_u)
    return share * (stats.rev(miner) / own)


def arr(stats: WalkStats, miner: Miner) -> float:
    return stats.rev(miner) / (stats.nb_a_r + stats.nb_a_u)


def compute_metrics(stats: WalkStats) -> MetricsReport:
    if stats.nb_a_r + stats.nb_a_u == 0:
        raise EmptyWalkError("no regular or uncle blocks in walk")
    rev_s = stats.rev(Miner.SELFISH)
    rev_h = stats.rev(Miner.HONEST)
    arr_s = arr(stats, Miner.SELFISH)
    arr_h = arr(stats, Miner.HONEST)
    for m, value in ((Miner.SELFISH, arr_s), (Miner.HONEST, arr_h)):
        assert math.isclose(value, arr_full(stats, m), rel_tol=1e-12, abs_tol=1e-15)

    hist = stats.uncle_distance_histogram
    n_uncles = sum(hist)
    if n_uncles:
        avg_reward = sum(c * uncle_reward(d) for d, c in enumerate(hist, 1)) / n_uncles
        avg_distance = sum(c * d for d, c in enumerate(hist, 1)) / n_uncles
    else:
        avg_reward = avg_distance = 0.0
    # one chain and no contest: gamma = 1/1
    gamma = stats.gamma_sum / stats.tie_events if stats.tie_events else 1.0

    return MetricsReport(
        rrr=rev_s / (rev_s + rev_h) if rev_s + rev_h > 0 else 0.0,
        arr_selfish=arr_s,
        arr_honest=arr_h,
        rbr=stats.nb_p_r[Miner.SELFISH] / stats.nb_a_r if stats.nb_a_r else 0.0,
        rns=stats.nb_a_r / stats.total_blocks,
        avg_uncle_reward=avg_reward,
        avg_uncle_distance=avg_distance,
        observed_gamma=gamma,
        revenue_ratio=rev_s / rev_h if rev_h > 0 else math.inf,
    )
