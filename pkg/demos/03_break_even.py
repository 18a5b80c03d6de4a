"""
When does selfish mining pay?
=============================

The break-even share is where the selfish miner's absolute revenue ratio
overtakes what the same share would earn mining honestly.  Stale blocks in the
honest network lower it.
"""

from unclesim import find_break_even

# 20 walks of 2**15 blocks: fast, but only good to about +-0.01
for delta in (0.0, 0.12, 0.24):
    mode = "bitcoin" if delta == 0 else "ethereum"
    result = find_break_even(delta, mode=mode, n_walks=20, min_blocks=2 ** 15)
    print(f"{mode:8s} delta={delta:.2f}: alpha* = {result.alpha_star:.3f} +- {result.sigma_alpha:.3f}")

# each probed alpha is kept, so the curve behind the bisection can be inspected
for s in result.samples:
    print(f"  alpha={s.alpha:.3f} gain={s.gain:+.5f}")
