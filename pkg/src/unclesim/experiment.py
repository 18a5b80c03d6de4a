"""Multi-walk batches, adaptive precision, sweeps, break-even search and CSV output."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from unclesim.engine import Mode, SimParams, WalkStats, derive_seed, run_walk
from unclesim.metrics import MetricsReport, compute_metrics
from unclesim.strategy import UncleMode

CSV_COLUMNS = (
    "alpha", "delta", "mode", "selfish_uncle_strategy", "walks", "blocks_per_walk",
    "doublings", "rrr_mean", "rrr_std", "arr_selfish_mean", "arr_selfish_std",
    "arr_honest_mean", "rbr_mean", "rbr_std", "rns_mean", "rns_std",
    "avg_uncle_reward", "avg_uncle_distance", "observed_gamma", "seed",
)

# per-walk metrics averaged across a batch
WALK_METRICS = ("rrr", "arr_selfish", "arr_honest", "rbr", "rns", "revenue_ratio")
# metrics taken from the pooled statistics of the batch
POOLED_METRICS = ("avg_uncle_reward", "avg_uncle_distance", "observed_gamma")


class NoCrossingError(RuntimeError):
    """Selfish and honest ARR do not cross inside the searched range."""


@dataclass(frozen=True)
class BatchConfig:
    params: SimParams
    n_walks: int = 100
    t1: float = 0.001
    t2: float = 0.01
    t1_alpha_range: tuple[float, float] = (0.15, 0.30)
    max_doublings: int = 6
    jobs: int = 1

    def __post_init__(self):
        if self.n_walks < 2:
            raise ValueError("a batch needs at least 2 walks")
        if not 0 < self.t1 < self.t2:
            raise ValueError("thresholds must satisfy 0 < t1 < t2")
        lo, hi = self.t1_alpha_range
        if lo > hi:
            raise ValueError("t1_alpha_range must be ordered")
        object.__setattr__(self, "t1_alpha_range", (float(lo), float(hi)))
        if self.max_doublings < 0:
            raise ValueError("max_doublings must be non-negative")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")

    def threshold(self, alpha: float | None = None) -> float:
        """Accepted sigma of ARR at ``alpha`` (defaults to the configured alpha)."""
        a = self.params.alpha if alpha is None else alpha
        lo, hi = self.t1_alpha_range
        return self.t1 if lo <= a <= hi else self.t2


@dataclass
class AggregateReport:
    """Means and sample standard deviations (ddof=1) of one batch."""

    params: SimParams
    walks: int
    blocks_per_walk: int
    doublings: int
    seed: int
    mean: dict[str, float]
    std: dict[str, float]
    pooled: dict[str, float]
    threshold: float = math.inf
    converged: bool = True
    walk_metrics: list[MetricsReport] = field(default_factory=list, repr=False)

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def delta(self) -> float:
        return self.params.delta

    def __getattr__(self, name):
        # rrr_mean, arr_selfish_std, avg_uncle_reward, ...
        if name.startswith("__"):
            raise AttributeError(name)
        d = self.__dict__
        for suffix, table in (("_mean", "mean"), ("_std", "std")):
            if name.endswith(suffix) and name[: -len(suffix)] in d.get(table, {}):
                return d[table][name[: -len(suffix)]]
        if name in d.get("pooled", {}):
            return d["pooled"][name]
        raise AttributeError(name)

    def row(self) -> dict:
        """CSV row with the exported columns."""
        p = self.params
        out = {
            "alpha": p.alpha, "delta": p.delta, "mode": p.mode.value,
            "selfish_uncle_strategy": p.selfish_uncle_strategy.name.lower(),
            "walks": self.walks, "blocks_per_walk": self.blocks_per_walk,
            "doublings": self.doublings,
        }
        for col in CSV_COLUMNS:
            if col in out or col == "seed":
                continue
            out[col] = getattr(self, col)
        out["seed"] = self.seed
        return out

    def echo(self) -> str:
        return " ".join(f"{k}={_fmt(v)}" for k, v in self.row().items())


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _walk_job(args):
    params, seed = args
    return run_walk(params, seed)


def run_walks(params: SimParams, n_walks: int, master_seed: int | None = None,
              jobs: int = 1) -> list[WalkStats]:
    """Run ``n_walks`` walks with seeds derived from ``master_seed``.

    Results are identical for any ``jobs`` since every walk owns its stream.
    """
    master = params.seed if master_seed is None else int(master_seed)
    tasks = [(params, derive_seed(master, i)) for i in range(n_walks)]
    if jobs <= 1 or n_walks < 2:
        return [_walk_job(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as pool:
        return list(pool.map(_walk_job, tasks, chunksize=max(1, n_walks // (4 * jobs))))


def aggregate(params: SimParams, stats: list[WalkStats], doublings: int = 0,
              seed: int | None = None) -> AggregateReport:
    if len(stats) < 2:
        raise ValueError("need at least two walks to estimate a deviation")
    reports = [compute_metrics(s) for s in stats]
    mean, std = {}, {}
    for name in WALK_METRICS:
        values = np.array([getattr(r, name) for r in reports], dtype=float)
        if np.isfinite(values).all():
            mean[name] = float(values.mean())
            std[name] = float(values.std(ddof=1))
        else:
            # revenue_ratio of a walk the honest side earned nothing in
            mean[name] = std[name] = math.inf
    pooled_stats = stats[0]
    for s in stats[1:]:
        pooled_stats = pooled_stats.merge(s)
    pooled_report = compute_metrics(pooled_stats)
    pooled = {name: getattr(pooled_report, name) for name in POOLED_METRICS}
    pooled["rrr_pooled"] = pooled_report.rrr
    pooled["arr_selfish_pooled"] = pooled_report.arr_selfish
    return AggregateReport(
        params=params, walks=len(stats), blocks_per_walk=params.min_blocks,
        doublings=doublings, seed=params.seed if seed is None else int(seed),
        mean=mean, std=std, pooled=pooled, walk_metrics=reports,
    )


def run_batch(params: SimParams, n_walks: int = 100, jobs: int = 1) -> AggregateReport:
    """One fixed-size batch at ``params.min_blocks`` blocks per walk."""
    return aggregate(params, run_walks(params, n_walks, jobs=jobs))


def run_batch_adaptive(config: BatchConfig) -> AggregateReport:
    """Double the block count until the selfish ARR deviation meets its threshold.

    The walk count stays fixed.  After ``max_doublings`` the last attempt is
    returned with ``converged=False``.
    """
    limit = config.threshold()
    params = config.params
    for doublings in range(config.max_doublings + 1):
        report = aggregate(params, run_walks(params, config.n_walks, jobs=config.jobs),
                           doublings=doublings)
        report.threshold = limit
        report.converged = report.std["arr_selfish"] < limit
        if report.converged:
            return report
        if doublings < config.max_doublings:
            params = params.replace(min_blocks=params.min_blocks * 2)
    return report


def alpha_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid ``start, start+step, ..., stop`` rounded to 12 digits."""
    if step <= 0:
        raise ValueError("step must be positive")
    if stop < start:
        raise ValueError("empty range")
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(n + 1)]


def sweep(base: SimParams, alphas, deltas=None, config: BatchConfig | None = None,
          adaptive: bool = True) -> list[AggregateReport]:
    """Batches over the ``alphas`` x ``deltas`` grid, delta-major, in input order."""
    deltas = [base.delta] if deltas is None else list(deltas)
    cfg = config or BatchConfig(base)
    out = []
    for d in deltas:
        for a in alphas:
            p = base.replace(alpha=float(a), delta=float(d))
            c = BatchConfig(p, cfg.n_walks, cfg.t1, cfg.t2, cfg.t1_alpha_range,
                            cfg.max_doublings, cfg.jobs)
            out.append(run_batch_adaptive(c) if adaptive else run_batch(p, c.n_walks, c.jobs))
    return out


@dataclass
class BreakEvenSample:
    alpha: float
    arr_selfish: float
    arr_honest_baseline: float
    sigma_selfish: float
    sigma_baseline: float

    @property
    def gain(self) -> float:
        return self.arr_selfish - self.arr_honest_baseline

    @property
    def sigma_gain(self) -> float:
        return math.hypot(self.sigma_selfish, self.sigma_baseline)


@dataclass
class BreakEven:
    alpha_star: float
    sigma_alpha: float
    samples: list[BreakEvenSample]

    def __iter__(self):
        return iter((self.alpha_star, self.sigma_alpha))


def _arr_pair(params: SimParams, n_walks: int, adaptive: bool, config: BatchConfig | None):
    """Selfish ARR and honest-counterfactual ARR at the same (alpha, delta, seed)."""
    honest = params.replace(selfish_mining=False)
    if adaptive:
        c = config or BatchConfig(params)
        kw = dict(n_walks=n_walks, t1=c.t1, t2=c.t2, t1_alpha_range=c.t1_alpha_range,
                  max_doublings=c.max_doublings, jobs=c.jobs)
        s = run_batch_adaptive(BatchConfig(params, **kw))
        h = run_batch(honest.replace(min_blocks=s.blocks_per_walk), n_walks, c.jobs)
    else:
        jobs = config.jobs if config else 1
        s = run_batch(params, n_walks, jobs)
        h = run_batch(honest, n_walks, jobs)
    return BreakEvenSample(params.alpha, s.mean["arr_selfish"], h.mean["arr_selfish"],
                           s.std["arr_selfish"], h.std["arr_selfish"])


def find_break_even(delta: float = 0.0, selfish_uncle_strategy=UncleMode.ALL,
                    mode: Mode | str = Mode.ETHEREUM, *, lo: float = 0.10, hi: float = 0.35,
                    step: float = 0.005, n_walks: int = 100, min_blocks: int | None = None,
                    seed: int = 0, bisect: bool = True, adaptive: bool = False,
                    config: BatchConfig | None = None, **param_overrides) -> BreakEven:
    """Smallest alpha where selfish mining earns more ARR than honest mining.

    The alpha grid ``lo:hi:step`` is scanned either fully (``bisect=False``)
    or by bisection on grid indices, which assumes a single sign change.  The
    crossing is interpolated linearly between the bracketing grid points and
    its deviation propagated from the per-walk sigmas of both ARR estimates.
    """
    kw = dict(delta=delta, mode=mode, selfish_uncle_strategy=selfish_uncle_strategy,
              seed=seed, **param_overrides)
    if min_blocks is not None:
        kw["min_blocks"] = min_blocks
    base = SimParams(alpha=lo, **kw)
    grid = alpha_grid(lo, hi, step)
    cache: dict[int, BreakEvenSample] = {}

    def sample(i):
        if i not in cache:
            cache[i] = _arr_pair(base.replace(alpha=grid[i]), n_walks, adaptive, config)
        return cache[i]

    if bisect:
        i, j = 0, len(grid) - 1
        if sample(i).gain >= 0 or sample(j).gain < 0:
            raise NoCrossingError(f"no profitability crossing in [{lo}, {hi}] at delta={delta}")
        while j - i > 1:
            m = (i + j) // 2
            if sample(m).gain < 0:
                i = m
            else:
                j = m
    else:
        for k in range(len(grid)):
            sample(k)
        i = next((k for k in range(len(grid) - 1)
                  if cache[k].gain < 0 <= cache[k + 1].gain), None)
        if i is None:
            raise NoCrossingError(f"no profitability crossing in [{lo}, {hi}] at delta={delta}")
        j = i + 1
    a, b = cache[i], cache[j]
    alpha_star, sigma = interpolate_crossing(a, b)
    return BreakEven(alpha_star, sigma, [cache[k] for k in sorted(cache)])


def interpolate_crossing(a: BreakEvenSample, b: BreakEvenSample) -> tuple[float, float]:
    """Zero of the line through the two gains, with first-order error propagation."""
    ga, gb = a.gain, b.gain
    if ga == gb:
        return 0.5 * (a.alpha + b.alpha), abs(b.alpha - a.alpha)
    t = ga / (ga - gb)
    x = a.alpha + t * (b.alpha - a.alpha)
    span = b.alpha - a.alpha
    # dx/dga = -gb*span/(ga-gb)^2 ; dx/dgb = ga*span/(ga-gb)^2
    den = (ga - gb) ** 2
    sigma = math.hypot(gb * span / den * a.sigma_gain, ga * span / den * b.sigma_gain)
    return x, sigma


def _check_row(row: dict) -> None:
    for col in CSV_COLUMNS:
        value = row.get(col)
        if value is None or (isinstance(value, float) and math.isnan(value)):
            raise ValueError(f"report has no value for column {col!r}")


def csv_text(reports, columns=CSV_COLUMNS, extra=None) -> str:
    """CSV text for ``reports``; ``extra`` maps each report to additional columns."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to export")
    buf = io.StringIO()
    writer = None
    for r in reports:
        row = r.row() if hasattr(r, "row") else dict(r)
        _check_row(row)
        if extra is not None:
            row.update(extra(r))
        if writer is None:
            cols = list(columns) + [c for c in row if c not in columns]
            writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n",
                                    extrasaction="ignore")
            writer.writeheader()
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def export_csv(reports, path, extra=None) -> None:
    """Write ``reports`` to ``path``; floats keep full ``repr`` precision."""
    text = csv_text(reports, extra=extra)
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(text)


def read_csv(path) -> list[dict]:
    """Parse an exported file back into typed rows."""
    ints = {"walks", "blocks_per_walk", "doublings", "seed"}
    strs = {"mode", "selfish_uncle_strategy", "rule"}
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append({k: (v if k in strs else int(v) if k in ints else float(v))
                    for k, v in row.items()})
    return out


def eyal_sirer_revenue(alpha: float, gamma: float = 0.5) -> float:
    """Closed-form relative revenue of selfish mining without uncles."""
    if not 0.0 <= alpha <= 0.5:
        raise ValueError("closed form holds for alpha in [0, 0.5]")
    num = alpha * (1 - alpha) ** 2 * (4 * alpha + gamma * (1 - 2 * alpha)) - alpha ** 3
    den = 1 - alpha * (1 + (2 - alpha) * alpha)
    return num / den


def validate_bitcoin(alphas, n_walks: int = 100, min_blocks: int | None = None,
                     seed: int = 0, jobs: int = 1) -> list[tuple[AggregateReport, float]]:
    """Bitcoin-mode batches paired with the closed-form revenue at gamma 0.5."""
    out = []
    for a in alphas:
        kw = {} if min_blocks is None else {"min_blocks": min_blocks}
        p = SimParams(alpha=float(a), mode=Mode.BITCOIN, seed=seed, **kw)
        out.append((run_batch(p, n_walks, jobs), eyal_sirer_revenue(float(a))))
    return out
