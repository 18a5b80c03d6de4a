"""
Bitcoin mode against the closed form
====================================

With uncle rewards switched off, the simulator reduces to the classic
selfish-mining model.  Its relative revenue should sit on the well-known
closed-form curve for gamma = 0.5.
"""

from unclesim import SimParams, eyal_sirer_revenue, run_batch

# short walks keep the demo quick; raise to 2**17 for three-decimal agreement
BLOCKS = 2 ** 15

print(f"{'alpha':>6} {'simulated':>10} {'closed form':>12}")
for alpha in (0.1, 0.2, 0.25, 0.3, 1 / 3, 0.4, 0.45):
    report = run_batch(SimParams(alpha, mode="bitcoin", min_blocks=BLOCKS), n_walks=20)
    print(f"{alpha:6.3f} {report.rrr_pooled:10.4f} {eyal_sirer_revenue(alpha):12.4f}")

# 0.25 is the only point where selfish mining neither gains nor loses
