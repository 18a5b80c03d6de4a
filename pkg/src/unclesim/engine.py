"""Single random walks: parameters, the driver loop and per-walk statistics."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, replace

import numpy as np

from unclesim import _kernels as K
from unclesim.chain import BlockTree, ChainRule, Miner
from unclesim.strategy import (HONEST_INCLUSION_PROBABILITY, SelfishState, UncleMode,
                               check_rates)

DEFAULT_MIN_BLOCKS = 2 ** 17


class Mode(enum.Enum):
    ETHEREUM = "ethereum"
    BITCOIN = "bitcoin"


@dataclass(frozen=True)
class SimParams:
    """Configuration of one walk.

    ``selfish_mining=False`` runs the honest counterfactual: the party with
    power ``alpha`` publishes every block like the honest network does.
    Bitcoin mode forces ``delta=0`` and disables uncle references for
    everyone.
    """

    alpha: float
    delta: float = 0.0
    mode: Mode = Mode.ETHEREUM
    selfish_uncle_strategy: UncleMode = UncleMode.ALL
    honest_inclusion_probability: float = HONEST_INCLUSION_PROBABILITY
    min_blocks: int = DEFAULT_MIN_BLOCKS
    seed: int = 0
    selfish_mining: bool = True
    rule: ChainRule = ChainRule.LONGEST
    uncle_weight: int = 1

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "mode", Mode(self.mode))
        set_(self, "rule", ChainRule(self.rule))
        set_(self, "selfish_uncle_strategy", UncleMode.parse(self.selfish_uncle_strategy))
        check_rates(self.alpha, self.delta)
        if not 0.0 <= self.honest_inclusion_probability <= 1.0:
            raise ValueError("honest inclusion probability must lie in [0, 1]")
        if self.min_blocks < 1:
            raise ValueError("min_blocks must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.uncle_weight < 0:
            raise ValueError("uncle_weight must be non-negative")
        if self.mode is Mode.BITCOIN:
            set_(self, "delta", 0.0)
            set_(self, "selfish_uncle_strategy", UncleMode.NONE)
            set_(self, "honest_inclusion_probability", 0.0)

    @property
    def honest_uncle_mode(self) -> UncleMode:
        return UncleMode.NONE if self.mode is Mode.BITCOIN else UncleMode.ALL

    @property
    def score_weight(self) -> int:
        return self.uncle_weight if self.rule is ChainRule.WEIGHTED else 0

    def replace(self, **changes) -> "SimParams":
        return replace(self, **changes)


@dataclass
class WalkStats:
    """Counts and revenues of one finalized walk, indexed by ``Miner``.

    Only published blocks enter the regular/uncle/stale counts; secret blocks
    dropped at the end of the walk are tallied in ``nb_unpublished``.
    """

    nb_p_r: list[int]
    nb_p_u: list[int]
    nb_p_stale: list[int]
    rev_regular: list[float]
    rev_uncle: list[float]
    rev_inclusion: list[float]
    uncle_distance_histogram: list[int]
    nb_unpublished: int
    main_chain_length: int
    events: list[int]
    tie_events: int = 0
    gamma_sum: float = 0.0
    equal_length_releases: int = 0
    weight_wins: int = 0
    abandoned_forks: int = 0
    seed: int = 0

    @property
    def nb_a_r(self) -> int:
        return sum(self.nb_p_r)

    @property
    def nb_a_u(self) -> int:
        return sum(self.nb_p_u)

    @property
    def nb_stale(self) -> int:
        return sum(self.nb_p_stale)

    @property
    def total_blocks(self) -> int:
        return self.nb_a_r + self.nb_a_u + self.nb_stale

    def rev(self, miner: Miner) -> float:
        return self.rev_regular[miner] + self.rev_uncle[miner] + self.rev_inclusion[miner]

    def merge(self, other: "WalkStats") -> "WalkStats":
        """Pool two walks; commutative and associative on every count."""
        a, b = asdict(self), asdict(other)
        out = {}
        for key, value in a.items():
            if isinstance(value, list):
                out[key] = [x + y for x, y in zip(value, b[key])]
            elif key == "seed":
                out[key] = min(value, b[key])
            else:
                out[key] = value + b[key]
        return WalkStats(**out)

    def to_dict(self) -> dict:
        return asdict(self)


def derive_seed(master_seed: int, walk_index: int) -> int:
    """64-bit seed of walk ``walk_index`` within a batch seeded by ``master_seed``.

    Streams are split with ``numpy.random.SeedSequence`` spawn keys, so walks
    never share state however many are run.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(walk_index),))
    return int(ss.generate_state(1, np.uint64)[0])


def walk_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def finalize_walk(tree: BlockTree, state: SelfishState) -> BlockTree:
    """Settle a secret fork left at the end of a walk.

    A fork strictly ahead of the best public chain is published, anything
    else is discarded.  A race is left alone; the final main-chain draw
    decides it.
    """
    st = state.to_array()
    K.finalize(tree._blocks, tree._meta, tree._best, st,
               np.empty(len(tree) + 1, dtype=np.int32))
    return tree


def collect_stats(tree: BlockTree, rng: np.random.Generator, counters=None,
                  gamma_sum: float = 0.0, seed: int = 0) -> WalkStats:
    """Pick the main chain with ``rng`` and tally classes and revenues."""
    n = len(tree)
    chain = K.main_chain(tree._blocks, n, tree.uncle_weight, rng)
    nb_r = np.zeros(2, np.int64)
    nb_u = np.zeros(2, np.int64)
    nb_s = np.zeros(2, np.int64)
    rr = np.zeros(2)
    ru = np.zeros(2)
    rb = np.zeros(2)
    hist = np.zeros(K.MAX_DISTANCE + 1, np.int64)
    _, _, _, unpub = K.tally(tree._blocks, n, chain, nb_r, nb_u, nb_s, rr, ru, rb, hist)
    if counters is None:
        counters = np.zeros(K.NCOUNTERS, np.int64)
    return WalkStats(
        nb_p_r=nb_r.tolist(), nb_p_u=nb_u.tolist(), nb_p_stale=nb_s.tolist(),
        rev_regular=rr.tolist(), rev_uncle=ru.tolist(), rev_inclusion=rb.tolist(),
        uncle_distance_histogram=hist[1:].tolist(), nb_unpublished=int(unpub),
        main_chain_length=len(chain) - 1,
        events=counters[[K.C_EV_SELFISH, K.C_EV_REGULAR, K.C_EV_STALE]].tolist(),
        tie_events=int(counters[K.C_TIE_EVENTS]), gamma_sum=float(gamma_sum),
        equal_length_releases=int(counters[K.C_EQUAL_RELEASES]),
        weight_wins=int(counters[K.C_WEIGHT_WINS]),
        abandoned_forks=int(counters[K.C_ABANDONED]), seed=int(seed),
    )


def simulate(params: SimParams, seed: int | None = None) -> tuple[BlockTree, WalkStats]:
    """Run one walk and return the finalized tree with its statistics."""
    seed = params.seed if seed is None else int(seed)
    rng = walk_rng(seed)
    n = params.min_blocks
    tree = BlockTree(n + 1, params.score_weight)
    st = SelfishState().to_array()
    counters = np.zeros(K.NCOUNTERS, np.int64)
    gamma = np.zeros(1)
    K.walk(tree._blocks, tree._meta, tree._best, tree._heads, st, n,
           params.alpha, params.delta, params.selfish_mining,
           int(params.selfish_uncle_strategy), 1.0,
           int(params.honest_uncle_mode), params.honest_inclusion_probability,
           params.score_weight, rng, counters, gamma)
    stats = collect_stats(tree, rng, counters, gamma[0], seed)
    return tree, stats


def run_walk(params: SimParams, seed: int | None = None) -> WalkStats:
    """Simulate exactly ``params.min_blocks`` mined blocks; deterministic per seed."""
    return simulate(params, seed)[1]
