import random

import pytest

from oracles import RefTree, eligible as ref_eligible
from unclesim import _kernels as K
from unclesim.chain import BlockTree, Miner, append_block

ACCEPTANCE_LINES = []


def random_tree_pair(seed: int, n_blocks: int = 64, uncle_weight: int = 0):
    """Grow a package tree and an oracle tree with the same random operations.

    Parents prefer recent blocks so forks stay within uncle range; uncle
    references are drawn from the oracle's candidate list.
    """
    rnd = random.Random(seed)
    tree = BlockTree(8, uncle_weight)
    ref = RefTree()
    while len(ref) < n_blocks:
        n = len(ref)
        parent = max(0, n - 1 - int(rnd.expovariate(0.4)))
        selfish = rnd.random() < 0.4
        status = rnd.choices(["public", "secret", "discarded"], [0.7, 0.2, 0.1])[0]
        cands = ref_eligible(ref, parent, selfish_view=selfish)
        k = rnd.choice([0, 0, 1, 2])
        refs = rnd.sample(cands, min(k, len(cands)))
        b = append_block(tree, parent, Miner.SELFISH if selfish else Miner.HONEST, refs,
                         published=status == "public")
        if status == "discarded":
            tree._blocks[b, K.PUBLISHED] = K.DISCARDED
        assert ref.add(parent, "S" if selfish else "H", refs, status) == b
    return tree, ref


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(12345)
