"""
How much an uncle pays
======================

An all-honest network with a 12% stale rate.  Honest miners fill each of the
two uncle slots with probability 0.33, so a typical stale block is picked up
about two blocks later and earns its miner roughly three quarters of a block.
"""

from unclesim import SimParams, run_batch

report = run_batch(SimParams(0.0, 0.12, honest_inclusion_probability=0.33, min_blocks=2 ** 16),
                   n_walks=40)
print(f"mean uncle reward   {report.avg_uncle_reward:.4f}")
print(f"mean uncle distance {report.avg_uncle_distance:.3f}")

# turning inclusion up makes uncles closer and better paid
eager = run_batch(SimParams(0.0, 0.12, honest_inclusion_probability=1.0, min_blocks=2 ** 16),
                  n_walks=40)
print(f"with p = 1: reward {eager.avg_uncle_reward:.4f}, distance {eager.avg_uncle_distance:.3f}")
