"""Block tree, main-chain selection, classification and uncle rewards."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from unclesim import _kernels as K

GENESIS = 0
MAX_UNCLES = 2
MAX_UNCLE_DISTANCE = K.MAX_DISTANCE
INCLUSION_REWARD = 1.0 / 32.0


class Miner(enum.IntEnum):
    HONEST = K.HONEST
    SELFISH = K.SELFISH


class ChainRule(enum.Enum):
    """How competing tips are ranked."""

    LONGEST = "longest"
    WEIGHTED = "weighted"


class ChainError(ValueError):
    pass


class UnknownBlockError(ChainError, KeyError):
    pass


class TooManyUnclesError(ChainError):
    pass


class UncleDistanceError(ChainError):
    pass


class UncleAncestryError(ChainError):
    """The uncle's parent is off the path, or the uncle is itself an ancestor."""


class DuplicateUncleError(ChainError):
    pass


class NotARootPathError(ChainError):
    pass


def uncle_reward(distance: int) -> float:
    """Reward paid to the miner of an uncle included ``distance`` blocks later."""
    if not 1 <= distance <= MAX_UNCLE_DISTANCE:
        raise UncleDistanceError(f"uncle distance {distance} outside 1..{MAX_UNCLE_DISTANCE}")
    return (8 - distance) / 8


@dataclass(frozen=True)
class Block:
    id: int
    parent: int
    height: int
    miner: Miner | None
    uncle_refs: tuple[int, ...]
    published: bool


@dataclass(frozen=True)
class BlockClass:
    kind: str
    distance: int | None = None

    @classmethod
    def uncle(cls, distance: int) -> "BlockClass":
        return cls("uncle", distance)

    @property
    def code(self) -> str:
        if self.kind == "uncle":
            return f"U{self.distance}"
        return self.kind[0].upper()

    def __str__(self) -> str:
        return self.code


REGULAR = BlockClass("regular")
STALE = BlockClass("stale")


class BlockTree:
    """Append-only block tree rooted at genesis.

    Storage is a flat ``int32`` matrix shared with the compiled kernels.  The
    tree also tracks the set of best published blocks, ranked by height
    (``uncle_weight=0``) or by height plus ``uncle_weight`` per referenced
    uncle, which is what honest miners build on.
    """

    def __init__(self, capacity: int = 64, uncle_weight: int = 0):
        capacity = max(int(capacity), 2)
        self._blocks, self._meta, self._best, self._heads = K.new_store(capacity)
        self.uncle_weight = int(uncle_weight)

    @classmethod
    def for_rule(cls, rule: ChainRule, capacity: int = 64, uncle_weight: int = 1) -> "BlockTree":
        return cls(capacity, uncle_weight if rule is ChainRule.WEIGHTED else 0)

    def __len__(self) -> int:
        return int(self._meta[K.M_SIZE])

    def __contains__(self, block_id) -> bool:
        return isinstance(block_id, (int, np.integer)) and 0 <= block_id < len(self)

    @property
    def capacity(self) -> int:
        return self._blocks.shape[0]

    def reserve(self, extra: int) -> None:
        need = len(self) + extra
        if need <= self.capacity:
            return
        cap = self.capacity
        while cap < need:
            cap *= 2
        blocks, _, best, heads = K.new_store(cap)
        n = len(self)
        blocks[:n] = self._blocks[:n]
        best[: self.capacity] = self._best
        heads[: self.capacity] = self._heads
        self._blocks, self._best, self._heads = blocks, best, heads

    def check(self, block_id) -> int:
        if block_id not in self:
            raise UnknownBlockError(f"unknown block id {block_id!r}")
        return int(block_id)

    # accessors
    def parent(self, b: int) -> int:
        return int(self._blocks[self.check(b), K.PARENT])

    def height(self, b: int) -> int:
        return int(self._blocks[self.check(b), K.HEIGHT])

    def miner(self, b: int) -> Miner | None:
        m = int(self._blocks[self.check(b), K.MINER])
        return None if m == K.NO_MINER else Miner(m)

    def uncle_refs(self, b: int) -> tuple[int, ...]:
        row = self._blocks[self.check(b)]
        return tuple(int(u) for u in (row[K.UNCLE0], row[K.UNCLE1]) if u >= 0)

    def is_published(self, b: int) -> bool:
        return self._blocks[self.check(b), K.PUBLISHED] == K.PUBLIC

    def is_discarded(self, b: int) -> bool:
        return self._blocks[self.check(b), K.PUBLISHED] == K.DISCARDED

    def score(self, b: int) -> int:
        return int(self._blocks[self.check(b), K.SCORE])

    def block(self, b: int) -> Block:
        return Block(self.check(b), self.parent(b), self.height(b), self.miner(b),
                     self.uncle_refs(b), self.is_published(b))

    def children(self, b: int) -> list[int]:
        out = []
        c = int(self._blocks[self.check(b), K.FIRST_CHILD])
        while c >= 0:
            out.append(c)
            c = int(self._blocks[c, K.NEXT_SIBLING])
        return sorted(out)

    def blocks_at_height(self, h: int) -> list[int]:
        if h < 0 or h >= self.capacity:
            return []
        out = []
        b = int(self._heads[h])
        while b >= 0:
            out.append(b)
            b = int(self._blocks[b, K.NEXT_SAME_HEIGHT])
        return sorted(out)

    def ancestors(self, b: int) -> list[int]:
        """Path from ``b`` (inclusive) down to genesis."""
        path = []
        b = self.check(b)
        while b >= 0:
            path.append(b)
            b = int(self._blocks[b, K.PARENT])
        return path

    def public_tips(self) -> list[int]:
        """Best published blocks as seen by the honest network."""
        return sorted(int(b) for b in self._best[: self._meta[K.M_NBEST]])

    def publish(self, b: int) -> None:
        b = self.check(b)
        if self._blocks[b, K.PUBLISHED] != K.SECRET:
            raise ChainError(f"block {b} is not secret")
        K.publish(self._blocks, self._meta, self._best, b)

    def __iter__(self):
        return iter(range(len(self)))

    def __repr__(self) -> str:
        return f"BlockTree({len(self)} blocks, tips={self.public_tips()})"


def _validate_refs(tree: BlockTree, parent: int, refs: list[int]) -> None:
    if len(refs) > MAX_UNCLES:
        raise TooManyUnclesError(f"{len(refs)} uncle references, at most {MAX_UNCLES}")
    if len(set(refs)) != len(refs):
        raise DuplicateUncleError(f"uncle referenced twice in {refs}")
    path = tree.ancestors(parent)
    on_path = set(path)
    height = tree.height(parent) + 1
    referenced = {u for a in path[: MAX_UNCLE_DISTANCE - 1] for u in tree.uncle_refs(a)}
    for u in refs:
        tree.check(u)
        d = height - tree.height(u)
        if not 1 <= d <= MAX_UNCLE_DISTANCE:
            raise UncleDistanceError(f"block {u} is {d} blocks away")
        if u in on_path:
            raise UncleAncestryError(f"block {u} is an ancestor")
        if tree.parent(u) not in on_path:
            raise UncleAncestryError(f"parent of block {u} is not on the ancestor path")
        if u in referenced:
            raise DuplicateUncleError(f"block {u} is already referenced on this path")


def append_block(tree: BlockTree, parent: int, miner: Miner, uncle_refs=(),
                 published: bool = True) -> int:
    """Append a block and return its id, validating every uncle reference."""
    parent = tree.check(parent)
    refs = [tree.check(u) for u in uncle_refs]
    _validate_refs(tree, parent, refs)
    refs += [K.NONE] * (MAX_UNCLES - len(refs))
    tree.reserve(1)
    return int(K.append(tree._blocks, tree._meta, tree._best, tree._heads, parent,
                        int(Miner(miner)), refs[0], refs[1], bool(published),
                        tree.uncle_weight))


def main_chain(tree: BlockTree, rng: np.random.Generator,
               rule: ChainRule | None = None, uncle_weight: int = 1) -> list[int]:
    """Best published root-to-tip path; tied tips are drawn from ``rng``.

    ``rule`` defaults to the ranking the tree was built with.
    """
    if rule is None:
        w = tree.uncle_weight
    else:
        w = uncle_weight if rule is ChainRule.WEIGHTED else 0
    chain = K.main_chain(tree._blocks, len(tree), w, rng)
    return [int(b) for b in chain]


def _check_root_path(tree: BlockTree, chain) -> None:
    if len(chain) == 0 or chain[0] != GENESIS:
        raise NotARootPathError("chain must start at genesis")
    for prev, b in zip(chain, chain[1:]):
        if tree.parent(b) != prev:
            raise NotARootPathError(f"block {b} does not extend {prev}")


def classify_blocks(tree: BlockTree, chain) -> dict[int, BlockClass]:
    """Classify every non-genesis block against ``chain``."""
    _check_root_path(tree, chain)
    classes = {b: STALE for b in range(1, len(tree))}
    for b in chain[1:]:
        classes[b] = REGULAR
    for b in chain[1:]:
        h = tree.height(b)
        for u in tree.uncle_refs(b):
            classes[u] = BlockClass.uncle(h - tree.height(u))
    return classes


def eligible_uncles(tree: BlockTree, prospective_parent: int,
                    perspective: Miner = Miner.HONEST, own_only: bool = False) -> list[int]:
    """Uncle candidates for a new block on ``prospective_parent``, most distant first.

    The honest perspective sees published blocks only; the selfish miner also
    sees his own secret blocks.
    """
    p = tree.check(prospective_parent)
    out = np.empty(K.MAX_CANDIDATES, dtype=np.int32)
    dist = np.empty(K.MAX_CANDIDATES, dtype=np.int32)
    n = K.eligible(tree._blocks, p, Miner(perspective) is Miner.SELFISH, own_only, out, dist)
    return [int(u) for u in out[:n]]


@dataclass
class RewardLedger:
    """Normalized revenue per miner, a regular block paying 1."""

    regular: dict = field(default_factory=lambda: {m: 0.0 for m in Miner})
    uncle: dict = field(default_factory=lambda: {m: 0.0 for m in Miner})
    inclusion: dict = field(default_factory=lambda: {m: 0.0 for m in Miner})

    def rev(self, miner: Miner) -> float:
        return self.regular[miner] + self.uncle[miner] + self.inclusion[miner]

    @property
    def total(self) -> float:
        return sum(self.rev(m) for m in Miner)


def compute_rewards(tree: BlockTree, classification: dict[int, BlockClass]) -> RewardLedger:
    ledger = RewardLedger()
    for b, cls in classification.items():
        m = tree.miner(b)
        if cls.kind == "regular":
            ledger.regular[m] += 1.0
            ledger.inclusion[m] += INCLUSION_REWARD * len(tree.uncle_refs(b))
        elif cls.kind == "uncle":
            ledger.uncle[m] += uncle_reward(cls.distance)
    return ledger


def dump_tree(tree: BlockTree, classification: dict[int, BlockClass] | None = None) -> str:
    """One line per block: ``id parent height miner class uncle_refs published``."""
    lines = []
    for b in tree:
        m = tree.miner(b)
        miner = "-" if m is None else m.name[0]
        if b == GENESIS:
            cls = "G"
        elif classification is None:
            cls = "?"
        else:
            cls = classification[b].code
        refs = ",".join(str(u) for u in tree.uncle_refs(b)) or "-"
        lines.append(f"{b} {tree.parent(b)} {tree.height(b)} {miner} {cls} {refs} "
                     f"{int(tree.is_published(b))}")
    return "\n".join(lines) + "\n"
