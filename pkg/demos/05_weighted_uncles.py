"""
Counting uncles in the fork choice
==================================

A proposed rule adds one unit of weight per referenced uncle.  A selfish
miner can see the honest stale blocks while the honest side cannot see its
secret fork, so on an equal-length release the selfish fork tends to weigh
more.
"""

from unclesim import ChainRule, SimParams, run_weighted_scenario, scripted_fork
import numpy as np

from unclesim.chain import classify_blocks, dump_tree, main_chain

for rule in ChainRule:
    f = scripted_fork(rule)
    print(f"{rule.value:8s}: selfish {f.selfish_weight} vs honest {f.honest_weight}, "
          f"selfish wins: {f.selfish_wins}")
# id parent height miner class uncles published
tree = scripted_fork(ChainRule.WEIGHTED).tree
chain = main_chain(tree, np.random.default_rng(0), ChainRule.WEIGHTED)
print(dump_tree(tree, classify_blocks(tree, chain)))

# the same seeds under both rules
cmp = run_weighted_scenario(SimParams(0.2, 0.12, min_blocks=2 ** 15), n_walks=20)
print(f"ARR weighted - longest: {cmp.arr_delta:+.5f}")
print(f"equal-length releases won by weight: {cmp.weight_wins[ChainRule.WEIGHTED]}")
