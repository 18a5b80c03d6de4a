"""Acceptance gate.

Each test appends one PASS/FAIL line to the "acceptance criteria" section of
the pytest summary, then asserts.  Full-size batches: 100 walks x 2^17
blocks.  Expect roughly ten minutes on one core.
"""

import math

import numpy as np
import pytest

import oracles
import test_strategy as ts
from conftest import ACCEPTANCE_LINES, random_tree_pair
from unclesim.chain import ChainRule, Miner, classify_blocks, eligible_uncles, main_chain
from unclesim.cli import ES_ALPHAS
from unclesim.consensus import run_weighted_scenario, scripted_fork
from unclesim.engine import SimParams, run_walk
from unclesim.experiment import (BatchConfig, BreakEvenSample, csv_text, find_break_even,
                                 interpolate_crossing, run_batch, run_batch_adaptive, run_walks)
from unclesim.metrics import arr, arr_full
from unclesim.strategy import UncleMode

WALKS = 100
BLOCKS = 2 ** 17


def record(criterion, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  [{criterion}] {detail}")
    assert ok, detail


def batch(alpha, delta=0.0, **kw):
    kw.setdefault("min_blocks", BLOCKS)
    return run_batch(SimParams(alpha, delta, **kw), WALKS)


# 1 -------------------------------------------------------------------------

def test_bitcoin_matches_closed_form():
    worst, parts = 0.0, []
    for a in ES_ALPHAS:
        r = batch(a, mode="bitcoin")
        d = r.rrr_pooled - oracles.eyal_sirer_markov(a)
        worst = max(worst, abs(d))
        parts.append(f"{a:.3f}:{d:+.4f}")
    record("1 bitcoin validation", worst <= 0.005,
           f"max |pooled RRR - closed form| = {worst:.4f} (tol 0.005); " + " ".join(parts))


# 2 -------------------------------------------------------------------------

@pytest.mark.parametrize("delta,mode,target", [
    (0.06, "ethereum", 0.245), (0.12, "ethereum", 0.225), (0.24, "ethereum", 0.185),
    (0.0, "bitcoin", 0.25)])
def test_break_even(delta, mode, target):
    r = find_break_even(delta, mode=mode, n_walks=WALKS, min_blocks=BLOCKS)
    record(f"2 break-even {mode} delta={delta}", abs(r.alpha_star - target) <= 0.012,
           f"alpha* = {r.alpha_star:.4f} +- {r.sigma_alpha:.4f}, target {target} +- 0.012")


# 3 -------------------------------------------------------------------------

def test_uncle_calibration():
    r = batch(0.0, 0.12, honest_inclusion_probability=0.33)
    rew, dist = r.avg_uncle_reward, r.avg_uncle_distance
    ok = abs(rew - 0.725) <= 0.02 and abs(dist - 2.0) <= 0.2
    record("3 uncle calibration", ok,
           f"mean uncle reward {rew:.4f} (0.725 +- 0.02), mean distance {dist:.3f} (2.0 +- 0.2)")


# 4 -------------------------------------------------------------------------

def test_rbr_half_crossing():
    samples = []
    for a in np.round(np.arange(0.30, 0.3801, 0.01), 10):
        r = batch(float(a), 0.24)
        se = r.std["rbr"] / math.sqrt(WALKS)
        samples.append(BreakEvenSample(float(a), r.mean["rbr"], 0.5, se, 0.0))
    pair = next(((s, t) for s, t in zip(samples, samples[1:]) if s.gain < 0 <= t.gain), None)
    if pair is None:
        record("4 RBR = 0.5 crossing", False,
               "no crossing on [0.30, 0.38]: " + " ".join(f"{s.alpha:.2f}:{s.arr_selfish:.4f}" for s in samples))
    x, sx = interpolate_crossing(*pair)
    record("4 RBR = 0.5 crossing", abs(x - 0.34) <= 0.01,
           f"delta=0.24 crossing at alpha = {x:.4f} +- {sx:.4f}, target 0.34 +- 0.01")


# 5 -------------------------------------------------------------------------

def test_sigma_protocol():
    lines, ok = [], True
    for a, d in ((0.1, 0.06), (0.2, 0.24), (0.3, 0.12), (0.45, 0.06)):
        cfg = BatchConfig(SimParams(a, d, min_blocks=BLOCKS), n_walks=WALKS)
        r = run_batch_adaptive(cfg)
        limit = cfg.threshold(a)
        good = r.converged and r.std["arr_selfish"] < limit
        ok &= good
        lines.append(f"({a},{d}) sigma={r.std['arr_selfish']:.5f}<{limit} @2^{int(math.log2(r.blocks_per_walk))}")
    record("5 sigma protocol", ok, "; ".join(lines))


# 6 -------------------------------------------------------------------------

def test_property_suites():
    rnd = np.random.default_rng(2024)
    # both ARR forms, and reward conservation, on 1000 walks
    arr_ok = cons_ok = True
    for i in range(1000):
        p = SimParams(float(rnd.uniform(0, 0.5)), float(rnd.uniform(0, 0.3)),
                      selfish_uncle_strategy=list(UncleMode)[i % 3], min_blocks=500)
        s = run_walk(p, i)
        for m in Miner:
            arr_ok &= math.isclose(arr(s, m), arr_full(s, m), rel_tol=1e-12, abs_tol=1e-15)
        hist = s.uncle_distance_histogram
        total = s.nb_a_r + sum(c * (8 - d) / 8 for d, c in enumerate(hist, 1)) + sum(hist) / 32
        cons_ok &= math.isclose(s.rev(Miner.HONEST) + s.rev(Miner.SELFISH), total, rel_tol=1e-12)
    # brute force on 10^4 random trees up to 64 blocks
    brute_ok = True
    for seed in range(10_000):
        tree, ref = random_tree_pair(seed, 2 + seed % 63, seed % 2)
        for b in range(len(ref)):
            for sf in (False, True):
                brute_ok &= (eligible_uncles(tree, b, Miner.SELFISH if sf else Miner.HONEST)
                             == oracles.eligible(ref, b, sf, False))
        chain = main_chain(tree, np.random.default_rng(seed))
        brute_ok &= chain[-1] in oracles.best_tips(ref, seed % 2)
        brute_ok &= ({b: c.code for b, c in classify_blocks(tree, chain).items()}
                     == oracles.classify(ref, chain))
    # determinism
    params = SimParams(0.3, 0.12, min_blocks=20_000, seed=77)
    det_ok = (csv_text([run_batch(params, 10)]) == csv_text([run_batch(params, 10)])
              and run_walks(params, 4, jobs=2) == run_walks(params, 4, jobs=1))
    # transition table, lead <= 5
    tt_ok = True
    for kind, lead in ts.CASES:
        for ev in (ts.SB, ts.HR, ts.HS):
            try:
                ts.test_transition_table(kind, lead, ev)
            except AssertionError:
                tt_ok = False
    ok = arr_ok and cons_ok and brute_ok and det_ok and tt_ok
    record("6 property suites", ok,
           f"ARR forms {arr_ok}, conservation {cons_ok} (1000 walks); brute force {brute_ok} "
           f"(10^4 trees); determinism {det_ok}; transition table {tt_ok}")


# 7 -------------------------------------------------------------------------

def test_weighted_uncles_demo():
    lo, wt = scripted_fork(ChainRule.LONGEST), scripted_fork(ChainRule.WEIGHTED)
    scripted_ok = (lo.tie or not lo.selfish_wins) and wt.selfish_wins
    cmp = run_weighted_scenario(SimParams(0.2, 0.12, min_blocks=BLOCKS), WALKS)
    se = cmp.arr_delta_std / math.sqrt(len(cmp.paired_arr_delta))
    record("7 weighted-uncle rule", scripted_ok and cmp.arr_delta >= 0,
           f"scripted fork: longest {'tie' if lo.tie else 'honest'}, weighted "
           f"{'selfish' if wt.selfish_wins else 'not selfish'}; paired ARR(weighted) - ARR(longest) "
           f"= {cmp.arr_delta:+.5f} +- {se:.5f}")


# 8 -------------------------------------------------------------------------

def test_trends():
    deltas = (0.0, 0.06, 0.12, 0.24)
    parts, inc_ok = [], True
    for a in (0.2, 0.3, 0.4):
        rs = [batch(a, d) for d in deltas]
        rrr = [r.mean["rrr"] for r in rs]
        ar = [r.mean["arr_selfish"] for r in rs]
        inc_ok &= all(np.diff(rrr) > 0) and all(np.diff(ar) > 0)
        parts.append(f"a={a}: rrr " + "/".join(f"{x:.3f}" for x in rrr)
                     + " arr " + "/".join(f"{x:.3f}" for x in ar))
    gap_ok = True
    for a in (0.4, 0.45):
        none = batch(a, 0.12, selfish_uncle_strategy="none").mean["arr_selfish"]
        full = batch(a, 0.12, selfish_uncle_strategy="all").mean["arr_selfish"]
        gap_ok &= none >= full
        parts.append(f"a={a} ARR none {none:.4f} vs all {full:.4f}")
    alphas = np.round(np.arange(0.0, 0.5001, 0.05), 10)
    rns = [batch(float(a), 0.24, min_blocks=2 ** 15).mean["rns"] for a in alphas]
    i = int(np.argmin(rns))
    rns_ok = 0 < i < len(rns) - 1 and rns[-1] > rns[i] + 0.01
    parts.append(f"RNS min {rns[i]:.3f} at a={alphas[i]:.2f}, {rns[-1]:.3f} at a=0.5")
    record("8 trends", inc_ok and gap_ok and rns_ok,
           f"increase with delta {inc_ok}, none >= all {gap_ok}, RNS recovers {rns_ok}; "
           + "; ".join(parts))
