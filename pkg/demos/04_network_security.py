"""
Main-chain share and network security
=====================================

RBR is the selfish share of the main chain; past 0.5 the attacker controls
it.  RNS is the fraction of published blocks that end up regular: it dips
while honest and selfish forks compete and climbs back once the attacker
simply dominates.
"""

import numpy as np

from unclesim import SimParams, run_batch

print(f"{'alpha':>6} {'rbr':>7} {'rns':>7}")
for alpha in np.arange(0.0, 0.51, 0.05):
    r = run_batch(SimParams(float(alpha), 0.24, min_blocks=2 ** 14), n_walks=20)
    print(f"{alpha:6.2f} {r.rbr_mean:7.4f} {r.rns_mean:7.4f}")
