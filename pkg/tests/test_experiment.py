import math

import pytest

from oracles import eyal_sirer_markov
from unclesim.engine import SimParams
from unclesim.experiment import (CSV_COLUMNS, BatchConfig, BreakEvenSample, NoCrossingError,
                                 alpha_grid, csv_text, export_csv, eyal_sirer_revenue,
                                 find_break_even, interpolate_crossing, read_csv, run_batch,
                                 run_batch_adaptive, run_walks, sweep)

SMALL = dict(min_blocks=2000)


def test_batch_config_invariants():
    p = SimParams(0.2)
    with pytest.raises(ValueError):
        BatchConfig(p, n_walks=1)
    with pytest.raises(ValueError):
        BatchConfig(p, t1=0.02, t2=0.01)
    c = BatchConfig(p)
    assert (c.n_walks, c.t1, c.t2, c.t1_alpha_range, c.max_doublings) == (100, 0.001, 0.01, (0.15, 0.30), 6)
    assert c.threshold(0.15) == c.threshold(0.30) == 0.001
    assert c.threshold(0.1) == c.threshold(0.31) == 0.01


def test_alpha_grid():
    g = alpha_grid(0.10, 0.35, 0.005)
    assert len(g) == 51 and g[0] == 0.10 and g[-1] == 0.35 and g[20] == 0.2


def test_batch_reproducible_and_job_independent():
    p = SimParams(0.3, 0.12, seed=9, **SMALL)
    a = run_batch(p, 6)
    b = run_batch(p, 6)
    assert csv_text([a]) == csv_text([b])
    assert run_walks(p, 4, jobs=2) == run_walks(p, 4, jobs=1)


def test_adaptive_zero_alpha_converges_immediately():
    r = run_batch_adaptive(BatchConfig(SimParams(0.0, 0.12, **SMALL), n_walks=5))
    assert r.converged and r.doublings == 0
    assert r.std["arr_selfish"] == 0.0


def test_adaptive_doubles_until_threshold():
    cfg = BatchConfig(SimParams(0.2, 0.12, min_blocks=500), n_walks=10, t1=0.004, t2=0.05)
    r = run_batch_adaptive(cfg)
    assert r.converged and r.std["arr_selfish"] < 0.004
    assert r.blocks_per_walk == 500 * 2 ** r.doublings and r.doublings >= 1


def test_adaptive_flags_non_convergence():
    cfg = BatchConfig(SimParams(0.2, 0.12, min_blocks=200), n_walks=5, t1=1e-6, t2=1e-5,
                      max_doublings=1)
    r = run_batch_adaptive(cfg)
    assert not r.converged and r.doublings == 1 and r.blocks_per_walk == 400


def test_csv_exact_header_and_round_trip(tmp_path):
    reports = sweep(SimParams(0.1, **SMALL), [0.1, 0.3], [0.0, 0.12],
                    BatchConfig(SimParams(0.1), n_walks=3), adaptive=False)
    path = tmp_path / "r.csv"
    export_csv(reports, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5
    rows = read_csv(path)
    assert [(r["alpha"], r["delta"]) for r in rows] == [(0.1, 0.0), (0.3, 0.0), (0.1, 0.12), (0.3, 0.12)]
    for row, rep in zip(rows, reports):
        assert row["rrr_mean"] == rep.rrr_mean              # full precision
        assert row["arr_selfish_std"] == rep.arr_selfish_std
        assert row["avg_uncle_reward"] == rep.avg_uncle_reward
    export_csv(reports[:1], path)
    assert len(path.read_text().splitlines()) == 2


def test_csv_errors(tmp_path):
    with pytest.raises(ValueError):
        csv_text([])
    r = run_batch(SimParams(0.2, **SMALL), 3)
    r.mean["rbr"] = math.nan
    with pytest.raises(ValueError):
        csv_text([r])
    with pytest.raises(OSError):
        export_csv([run_batch(SimParams(0.2, **SMALL), 3)], tmp_path / "missing" / "x.csv")


def test_closed_form_matches_markov_oracle():
    for a in (0.0, 0.1, 0.2, 0.25, 0.3, 1 / 3, 0.4, 0.45):
        assert eyal_sirer_revenue(a) == pytest.approx(eyal_sirer_markov(a, n_states=200), abs=1e-9)
    assert eyal_sirer_revenue(0.25) == pytest.approx(0.25)


def test_interpolation_and_sigma_propagation():
    a = BreakEvenSample(0.20, 0.190, 0.192, 0.001, 0.001)
    b = BreakEvenSample(0.21, 0.203, 0.201, 0.001, 0.001)
    x, s = interpolate_crossing(a, b)
    assert x == pytest.approx(0.205)
    # numeric derivative check of the propagated sigma
    eps = 1e-7
    ga, gb = a.gain, b.gain
    f = lambda ga, gb: 0.20 + ga / (ga - gb) * 0.01
    da = (f(ga + eps, gb) - f(ga - eps, gb)) / (2 * eps)
    db = (f(ga, gb + eps) - f(ga, gb - eps)) / (2 * eps)
    assert s == pytest.approx(math.hypot(da * a.sigma_gain, db * b.sigma_gain), rel=1e-5)


def test_break_even_bisection_equals_full_scan():
    kw = dict(lo=0.15, hi=0.35, step=0.02, n_walks=8, min_blocks=4000, seed=3)
    full = find_break_even(0.0, mode="bitcoin", bisect=False, **kw)
    fast = find_break_even(0.0, mode="bitcoin", **kw)
    gains = [s.gain for s in full.samples]
    assert gains[0] < 0 < gains[-1]
    assert fast.alpha_star == pytest.approx(full.alpha_star)
    assert len(fast.samples) < len(full.samples)
    assert 0.2 < full.alpha_star < 0.3


def test_break_even_reports_missing_crossing():
    with pytest.raises(NoCrossingError):
        find_break_even(0.0, mode="bitcoin", lo=0.3, hi=0.4, step=0.05, n_walks=4, min_blocks=3000)


def test_infinite_revenue_ratio_survives_export():
    r = run_batch(SimParams(0.9, min_blocks=50), 5)
    assert any(m.revenue_ratio == math.inf for m in r.walk_metrics)
    assert r.mean["revenue_ratio"] == r.std["revenue_ratio"] == math.inf
    assert not math.isnan(r.std["arr_selfish"])
    text = csv_text([r])
    assert "nan" not in text
