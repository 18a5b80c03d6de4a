"""Honest network and selfish miner behavior, one mined block at a time."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from unclesim import _kernels as K
from unclesim.chain import BlockTree, Miner

HONEST_INCLUSION_PROBABILITY = 0.33


class EventKind(enum.IntEnum):
    SELFISH_BLOCK = K.EV_SELFISH
    HONEST_REGULAR = K.EV_REGULAR
    HONEST_STALE = K.EV_STALE


class UncleMode(enum.IntEnum):
    ALL = K.US_ALL
    OWN = K.US_OWN
    NONE = K.US_NONE

    @classmethod
    def parse(cls, value) -> "UncleMode":
        if isinstance(value, cls):
            return value
        names = {"all": cls.ALL, "own": cls.OWN, "own_only": cls.OWN, "none": cls.NONE}
        try:
            return names[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown uncle strategy {value!r}") from None


@dataclass(frozen=True)
class UncleStrategy:
    """Which eligible uncles a miner references, and how eagerly (per slot)."""

    mode: UncleMode = UncleMode.ALL
    inclusion_probability: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", UncleMode.parse(self.mode))
        if not 0.0 <= self.inclusion_probability <= 1.0:
            raise ValueError("inclusion probability must lie in [0, 1]")

    @classmethod
    def honest(cls, p: float = HONEST_INCLUSION_PROBABILITY) -> "UncleStrategy":
        return cls(UncleMode.ALL, p)

    @classmethod
    def selfish(cls, mode=UncleMode.ALL) -> "UncleStrategy":
        return cls(mode, 1.0)

    @classmethod
    def none(cls) -> "UncleStrategy":
        return cls(UncleMode.NONE, 0.0)


class Phase(enum.IntEnum):
    IDLE = K.IDLE
    HIDING = K.HIDING
    RACING = K.RACING


@dataclass(frozen=True)
class SelfishState:
    """Where the selfish miner stands.

    ``secret_fork`` lists the withheld blocks root-first while hiding;
    ``own_tip`` and ``rival_tip`` are the two published competitors while
    racing.
    """

    phase: Phase = Phase.IDLE
    secret_fork: tuple[int, ...] = ()
    fork_base: int | None = None
    own_tip: int | None = None
    rival_tip: int | None = None

    def lead(self, tree: BlockTree) -> int:
        """Score of the secret tip minus the best public score (0 unless hiding)."""
        if self.phase is not Phase.HIDING:
            return 0
        return tree.score(self.secret_fork[-1]) - int(tree._meta[K.M_BEST])

    def to_array(self) -> np.ndarray:
        st = np.full(K.NSTATE, K.NONE, dtype=np.int64)
        st[K.S_PHASE] = int(self.phase)
        st[K.S_LEN] = len(self.secret_fork)
        if self.phase is Phase.HIDING:
            st[K.S_BASE] = self.fork_base
            st[K.S_TIP] = self.secret_fork[-1]
        elif self.phase is Phase.RACING:
            st[K.S_OWN] = self.own_tip
            st[K.S_RIVAL] = self.rival_tip
        return st

    @classmethod
    def from_array(cls, st: np.ndarray, tree: BlockTree) -> "SelfishState":
        phase = Phase(int(st[K.S_PHASE]))
        if phase is Phase.HIDING:
            fork = tree.ancestors(int(st[K.S_TIP]))[: int(st[K.S_LEN])]
            return cls(phase, tuple(reversed(fork)), int(st[K.S_BASE]))
        if phase is Phase.RACING:
            return cls(phase, own_tip=int(st[K.S_OWN]), rival_tip=int(st[K.S_RIVAL]))
        return cls()

    def validate(self, tree: BlockTree) -> None:
        if self.phase is Phase.HIDING:
            if not self.secret_fork:
                raise ValueError("hiding without a secret fork")
            prev = self.fork_base
            for b in self.secret_fork:
                if tree.parent(b) != prev or tree.is_published(b) or tree.miner(b) is not Miner.SELFISH:
                    raise ValueError(f"secret fork is not a linear chain of secret selfish blocks at {b}")
                prev = b
        elif self.phase is Phase.RACING:
            for b in (self.own_tip, self.rival_tip):
                if b is None or not tree.is_published(b):
                    raise ValueError("racing tips must be published")
            if tree.miner(self.own_tip) is not Miner.SELFISH:
                raise ValueError("own tip was not mined by the selfish miner")


def check_rates(alpha: float, delta: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside [0, 1]")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta={delta} outside [0, 1]")


def event_probabilities(alpha: float, delta: float) -> dict[EventKind, float]:
    check_rates(alpha, delta)
    stale = delta * (1.0 - alpha)
    return {
        EventKind.SELFISH_BLOCK: alpha,
        EventKind.HONEST_REGULAR: 1.0 - alpha - stale,
        EventKind.HONEST_STALE: stale,
    }


def sample_event(alpha: float, delta: float, rng: np.random.Generator) -> EventKind:
    check_rates(alpha, delta)
    return EventKind(K.sample_event(alpha, delta, rng))


def _buffers():
    return (np.empty(K.MAX_CANDIDATES, dtype=np.int32),
            np.empty(K.MAX_CANDIDATES, dtype=np.int32))


def select_uncles(tree: BlockTree, prospective_parent: int, strategy: UncleStrategy,
                  perspective: Miner, rng: np.random.Generator) -> list[int]:
    """Fill up to two uncle slots, most distant candidates first.

    Each slot is filled with the strategy's inclusion probability by the most
    distant candidate not yet taken.
    """
    p = tree.check(prospective_parent)
    out, dist = _buffers()
    u0, u1 = K.select_uncles(tree._blocks, p, int(strategy.mode),
                             Miner(perspective) is Miner.SELFISH,
                             strategy.inclusion_probability, rng, out, dist)
    return [int(u) for u in (u0, u1) if u >= 0]


def honest_step(tree: BlockTree, event: EventKind, uncle_strategy: UncleStrategy,
                rng: np.random.Generator, miner: Miner = Miner.HONEST) -> int:
    """Mine and publish one honest block; returns its id.

    A regular block extends a uniformly drawn best public tip.  A stale block
    becomes a rival of the best public tip: its parent is drawn uniformly
    among the distinct parents of public blocks at the tip height.  At genesis a stale event is mined
    as a regular one.
    """
    event = EventKind(event)
    if event is EventKind.SELFISH_BLOCK:
        raise ValueError("honest_step needs an honest event")
    tree.reserve(1)
    out, dist = _buffers()
    return int(K.honest_step(tree._blocks, tree._meta, tree._best, tree._heads, int(event),
                             int(uncle_strategy.mode), uncle_strategy.inclusion_probability,
                             int(miner), tree.uncle_weight, rng, out, dist))


def selfish_step(tree: BlockTree, state: SelfishState, event: EventKind,
                 uncle_strategy: UncleStrategy, rng: np.random.Generator,
                 honest_strategy: UncleStrategy | None = None,
                 counters: np.ndarray | None = None) -> tuple[SelfishState, list[int]]:
    """Advance one step of the selfish-mining walk.

    On a selfish event the selfish miner mines.  On an honest event the
    honest block is mined first (with ``honest_strategy``) and the selfish
    miner then reacts to it.  Returns the successor state and the blocks the
    selfish miner published in this step.
    """
    state.validate(tree)
    event = EventKind(event)
    st = state.to_array()
    pubs = np.empty(len(tree) + 2, dtype=np.int32)
    if counters is None:
        counters = np.zeros(K.NCOUNTERS, dtype=np.int64)
    if event is EventKind.SELFISH_BLOCK:
        tree.reserve(1)
        out, dist = _buffers()
        n = K.selfish_mine(tree._blocks, tree._meta, tree._best, tree._heads, st,
                           int(uncle_strategy.mode), uncle_strategy.inclusion_probability,
                           tree.uncle_weight, rng, out, dist, pubs)
    else:
        if honest_strategy is None:
            honest_strategy = UncleStrategy.honest()
        prev_best = int(tree._meta[K.M_BEST])
        b = honest_step(tree, event, honest_strategy, rng)
        n = K.selfish_react(tree._blocks, tree._meta, tree._best, st, prev_best, b,
                            pubs, counters)
    return SelfishState.from_array(st, tree), [int(x) for x in pubs[:n]]
