"""Weighted-uncle chain selection and its effect on a withholding miner."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from unclesim import _kernels as K
from unclesim.chain import BlockTree, ChainRule, Miner, append_block
from unclesim.engine import SimParams, walk_rng
from unclesim.experiment import AggregateReport, aggregate, csv_text, run_walks
from unclesim.strategy import EventKind, SelfishState, UncleStrategy, selfish_step

ChainSelectionRule = ChainRule


def chain_weight(tree: BlockTree, tip: int, rule: ChainRule = ChainRule.LONGEST,
                 uncle_weight: int = 1) -> int:
    """Path length from genesis to ``tip``, plus ``uncle_weight`` per referenced
    uncle on that path under the weighted rule.

    Recomputed from the path, independent of the cached scores.
    """
    path = tree.ancestors(tip)
    weight = len(path) - 1
    if ChainRule(rule) is ChainRule.WEIGHTED:
        weight += uncle_weight * sum(len(tree.uncle_refs(b)) for b in path)
    return weight


@dataclass
class ScriptedFork:
    """Outcome of the scripted equal-length release."""

    rule: ChainRule
    tree: BlockTree
    selfish_tip: int
    honest_tip: int
    state: SelfishState
    published: list[int]
    counters: np.ndarray

    @property
    def selfish_weight(self) -> int:
        return chain_weight(self.tree, self.selfish_tip, self.rule)

    @property
    def honest_weight(self) -> int:
        return chain_weight(self.tree, self.honest_tip, self.rule)

    @property
    def tie(self) -> bool:
        return self.selfish_weight == self.honest_weight

    @property
    def selfish_wins(self) -> bool:
        return self.tree.public_tips() == [self.selfish_tip]


def scripted_fork(rule: ChainRule = ChainRule.LONGEST, seed: int = 0) -> ScriptedFork:
    """Equal-length forks where only the selfish fork references a public uncle.

    The public chain is ``0-1-2-3`` with a public stale block ``4`` on ``1``.
    The selfish miner mines ``5`` on ``3`` in secret, referencing ``4``.  An
    honest block ``6`` on ``3`` then arrives without references and the
    selfish miner reacts.  Heights tie; weights do not.
    """
    rule = ChainRule(rule)
    tree = BlockTree.for_rule(rule, capacity=16)
    a1 = append_block(tree, 0, Miner.HONEST)
    a2 = append_block(tree, a1, Miner.HONEST)
    a3 = append_block(tree, a2, Miner.HONEST)
    append_block(tree, a1, Miner.HONEST)
    rng = walk_rng(seed)
    counters = np.zeros(K.NCOUNTERS, np.int64)
    state, pubs = selfish_step(tree, SelfishState(), EventKind.SELFISH_BLOCK,
                               UncleStrategy.selfish(), rng, counters=counters)
    s_tip = state.secret_fork[-1]
    state, released = selfish_step(tree, state, EventKind.HONEST_REGULAR,
                                   UncleStrategy.selfish(), rng,
                                   honest_strategy=UncleStrategy.none(), counters=counters)
    h_tip = len(tree) - 1
    assert tree.parent(h_tip) == a3 and tree.parent(s_tip) == a3
    return ScriptedFork(rule, tree, s_tip, h_tip, state, pubs + released, counters)


@dataclass
class RuleComparison:
    """Paired batches of the same walks under both chain rules."""

    params: SimParams
    reports: dict[ChainRule, AggregateReport]
    equal_length_releases: dict[ChainRule, int]
    weight_wins: dict[ChainRule, int]
    abandoned_forks: dict[ChainRule, int]
    paired_arr_delta: list[float] = field(repr=False, default_factory=list)

    @property
    def arr_delta(self) -> float:
        """Mean selfish ARR (weighted minus longest) over paired walks."""
        return float(np.mean(self.paired_arr_delta))

    @property
    def arr_delta_std(self) -> float:
        return float(np.std(self.paired_arr_delta, ddof=1))

    @property
    def rrr_delta(self) -> float:
        r = self.reports
        return r[ChainRule.WEIGHTED].mean["rrr"] - r[ChainRule.LONGEST].mean["rrr"]

    def weight_win_frequency(self, rule: ChainRule = ChainRule.WEIGHTED) -> float:
        """Share of equal-length releases won outright by uncle weight."""
        n = self.equal_length_releases[rule]
        return self.weight_wins[rule] / n if n else 0.0

    def csv(self) -> str:
        rows = [self.reports[ChainRule.LONGEST], self.reports[ChainRule.WEIGHTED]]
        return csv_text(rows, extra=lambda r: {"rule": r.params.rule.value})


def run_weighted_scenario(params: SimParams, n_walks: int = 100, jobs: int = 1) -> RuleComparison:
    """Run identical seeds under the longest-chain and weighted-uncle rules."""
    reports, eq, wins, ab = {}, {}, {}, {}
    per_walk = {}
    for rule in (ChainRule.LONGEST, ChainRule.WEIGHTED):
        p = params.replace(rule=rule)
        stats = run_walks(p, n_walks, jobs=jobs)
        reports[rule] = aggregate(p, stats)
        eq[rule] = sum(s.equal_length_releases for s in stats)
        wins[rule] = sum(s.weight_wins for s in stats)
        ab[rule] = sum(s.abandoned_forks for s in stats)
        per_walk[rule] = [m.arr_selfish for m in reports[rule].walk_metrics]
    delta = [w - l for w, l in zip(per_walk[ChainRule.WEIGHTED], per_walk[ChainRule.LONGEST])]
    return RuleComparison(params, reports, eq, wins, ab, delta)

