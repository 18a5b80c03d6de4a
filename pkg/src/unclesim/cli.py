"""Command-line front end: ``unclesim <command> [flags]``."""

from __future__ import annotations

import argparse
import os
import sys

from unclesim import experiment as ex
from unclesim.chain import ChainRule, classify_blocks, dump_tree, main_chain
from unclesim.consensus import run_weighted_scenario, scripted_fork
from unclesim.engine import DEFAULT_MIN_BLOCKS, Mode, SimParams, simulate, walk_rng
from unclesim.strategy import HONEST_INCLUSION_PROBABILITY, UncleMode

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NONCONVERGED = 2
EXIT_IO = 3

ES_ALPHAS = (0.10, 0.20, 0.25, 0.30, 1 / 3, 0.40, 0.45)


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def _unit(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {text!r}") from None
        if not 0.0 <= v <= 1.0:
            raise argparse.ArgumentTypeError(f"{name}={v} outside [0, 1]")
        return v
    return conv


def _positive(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _alpha_range(text):
    try:
        a, b, step = (float(x) for x in text.split(":"))
        grid = ex.alpha_grid(a, b, step)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad --alpha-range {text!r}: expected a:b:step ({e})") from None
    for x in grid:
        _unit("alpha")(x)
    return grid


def _delta_list(text):
    return [_unit("delta")(x) for x in text.split(",") if x.strip()]


def _common(p, alpha_default=None, batch=True):
    g = p.add_argument_group("model")
    if alpha_default is not False:
        g.add_argument("--alpha", type=_unit("alpha"), default=alpha_default,
                       required=alpha_default is None, help="selfish computational share")
    g.add_argument("--delta", type=_unit("delta"), default=0.0,
                   help="honest stale block ratio")
    g.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.ETHEREUM.value)
    g.add_argument("--uncle-strategy", choices=["all", "own", "none"], default="all",
                   help="which uncles the selfish miner references")
    g.add_argument("--inclusion-prob", type=_unit("inclusion-prob"),
                   default=HONEST_INCLUSION_PROBABILITY,
                   help="honest chance to fill each uncle slot")
    g.add_argument("--rule", choices=[r.value for r in ChainRule], default="longest",
                   help="chain selection rule")
    g = p.add_argument_group("batch")
    g.add_argument("--walks", type=_positive, default=100, help="walks per batch")
    g.add_argument("--min-blocks", type=_positive, default=DEFAULT_MIN_BLOCKS,
                   help="blocks per walk before doubling")
    g.add_argument("--seed", type=_seed, default=0, help="master seed")
    g.add_argument("--jobs", type=_positive, default=os.cpu_count() or 1,
                   help="worker processes")
    if batch:
        g.add_argument("--t1", type=float, default=0.001, help="ARR sigma limit inside the T1 range")
        g.add_argument("--t2", type=float, default=0.01, help="ARR sigma limit elsewhere")
        g.add_argument("--max-doublings", type=int, default=6)
        g.add_argument("--fixed", action="store_true",
                       help="single batch at --min-blocks, no doubling")
    p.add_argument("--out", required=True, help="CSV output path, '-' for stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unclesim", description="Selfish mining with uncle rewards.",
                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("simulate", help="one batch at a single (alpha, delta)", formatter_class=fmt)
    _common(p)
    p.add_argument("--dump", help="write the block tree of walk 0 to this path")

    p = sub.add_parser("sweep", help="batches over an alpha x delta grid", formatter_class=fmt)
    _common(p, alpha_default=False)
    p.add_argument("--alpha-range", type=_alpha_range, default="0.0:0.45:0.05",
                   help="alpha grid a:b:step (inclusive)")
    p.add_argument("--delta-list", type=_delta_list, default=None,
                   help="comma-separated deltas (default: --delta)")

    p = sub.add_parser("break-even", help="alpha where selfish mining starts to pay",
                       formatter_class=fmt)
    _common(p, alpha_default=False)
    p.add_argument("--lo", type=_unit("lo"), default=0.10)
    p.add_argument("--hi", type=_unit("hi"), default=0.35)
    p.add_argument("--step", type=float, default=0.005)
    p.add_argument("--full-scan", action="store_true", help="evaluate the whole grid")

    p = sub.add_parser("validate-bitcoin", help="Bitcoin mode against the closed form",
                       formatter_class=fmt)
    _common(p, alpha_default=False, batch=False)
    p.add_argument("--alpha", type=_unit("alpha"), action="append", default=None,
                   help=f"repeatable; default {', '.join(f'{a:.4g}' for a in ES_ALPHAS)}")
    p.add_argument("--tolerance", type=float, default=0.005)

    p = sub.add_parser("ecip-demo", help="longest chain versus weighted uncles",
                       formatter_class=fmt)
    _common(p, alpha_default=0.2, batch=False)
    return parser


def _params(args, alpha=None) -> SimParams:
    return SimParams(
        alpha=args.alpha if alpha is None else alpha, delta=args.delta, mode=args.mode,
        selfish_uncle_strategy=args.uncle_strategy,
        honest_inclusion_probability=args.inclusion_prob, min_blocks=args.min_blocks,
        seed=args.seed, rule=args.rule,
    )


def _config(args, params) -> ex.BatchConfig:
    return ex.BatchConfig(params, n_walks=args.walks, t1=args.t1, t2=args.t2,
                          max_doublings=args.max_doublings, jobs=args.jobs)


def _echo(args) -> None:
    items = {k: v for k, v in sorted(vars(args).items())}
    print("config: " + " ".join(f"{k}={v}" for k, v in items.items()), flush=True)


def _write(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="", encoding="ascii") as fh:
            fh.write(text)
    except OSError as e:
        raise IOError(f"cannot write {out}: {e}") from e
    print(f"wrote {out}")


def _check_writable(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise IOError(f"cannot write {path}: directory {parent} is missing or read-only")


def _batch(args, params):
    if args.fixed:
        return ex.run_batch(params, args.walks, args.jobs)
    return ex.run_batch_adaptive(_config(args, params))


def _status(reports) -> int:
    bad = [r for r in reports if not r.converged]
    for r in bad:
        print(f"not converged: alpha={r.alpha} delta={r.delta} sigma(ARR)={r.std['arr_selfish']:.6f}"
              f" >= {r.threshold}", file=sys.stderr)
    return EXIT_NONCONVERGED if bad else EXIT_OK


def cmd_simulate(args) -> int:
    params = _params(args)
    _config(args, params)
    report = _batch(args, params)
    print(report.echo())
    _write(args.out, ex.csv_text([report]))
    if args.dump:
        tree, _ = simulate(params.replace(min_blocks=report.blocks_per_walk),
                           ex.derive_seed(params.seed, 0))
        chain = main_chain(tree, walk_rng(0))
        _write(args.dump, dump_tree(tree, classify_blocks(tree, chain)))
    return _status([report])


def cmd_sweep(args) -> int:
    base = _params(args, alpha=args.alpha_range[0])
    cfg = _config(args, base)
    deltas = args.delta_list or [args.delta]
    reports = ex.sweep(base, args.alpha_range, deltas, cfg, adaptive=not args.fixed)
    for r in reports:
        print(r.echo())
    _write(args.out, ex.csv_text(reports))
    return _status(reports)


def cmd_break_even(args) -> int:
    base = _params(args, alpha=args.lo)
    cfg = _config(args, base)
    over = dict(honest_inclusion_probability=args.inclusion_prob, rule=args.rule)
    result = ex.find_break_even(
        args.delta, args.uncle_strategy, args.mode, lo=args.lo, hi=args.hi, step=args.step,
        n_walks=args.walks, min_blocks=args.min_blocks, seed=args.seed,
        bisect=not args.full_scan, adaptive=not args.fixed, config=cfg, **over)
    print(f"alpha_star={result.alpha_star:.6f} sigma_alpha={result.sigma_alpha:.6f}")
    lines = ["delta,mode,selfish_uncle_strategy,alpha,arr_selfish,arr_honest_baseline,"
             "sigma_selfish,sigma_baseline,alpha_star,sigma_alpha,walks,seed"]
    for s in result.samples:
        lines.append(",".join(str(x) for x in (
            base.delta, base.mode.value, base.selfish_uncle_strategy.name.lower(), repr(s.alpha),
            repr(s.arr_selfish), repr(s.arr_honest_baseline), repr(s.sigma_selfish),
            repr(s.sigma_baseline), repr(result.alpha_star), repr(result.sigma_alpha),
            args.walks, args.seed)))
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_validate_bitcoin(args) -> int:
    alphas = args.alpha or list(ES_ALPHAS)
    results = ex.validate_bitcoin(alphas, args.walks, args.min_blocks, args.seed, args.jobs)
    ok = True
    for r, ref in results:
        diff = r.mean["rrr"] - ref
        good = abs(diff) <= args.tolerance
        ok &= good
        print(f"alpha={r.alpha:.4f} rrr={r.mean['rrr']:.5f} closed_form={ref:.5f} "
              f"diff={diff:+.5f} {'ok' if good else 'OFF'}")
    _write(args.out, ex.csv_text([r for r, _ in results],
                                 extra=lambda r: {"closed_form": ex.eyal_sirer_revenue(r.alpha)}))
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_ecip_demo(args) -> int:
    for rule in ChainRule:
        f = scripted_fork(rule)
        print(f"scripted fork, {rule.value}: selfish weight {f.selfish_weight}, "
              f"honest weight {f.honest_weight}, "
              f"{'tie' if f.tie else 'selfish wins' if f.selfish_wins else 'honest wins'}")
    params = _params(args)
    cmp = run_weighted_scenario(params, args.walks, args.jobs)
    for rule in ChainRule:
        r = cmp.reports[rule]
        print(f"{rule.value}: arr_selfish={r.mean['arr_selfish']:.5f} rrr={r.mean['rrr']:.5f} "
              f"equal_length_releases={cmp.equal_length_releases[rule]} "
              f"weight_wins={cmp.weight_wins[rule]} abandoned={cmp.abandoned_forks[rule]}")
    print(f"paired arr delta (weighted - longest) = {cmp.arr_delta:+.6f} "
          f"+- {cmp.arr_delta_std / len(cmp.paired_arr_delta) ** 0.5:.6f}")
    _write(args.out, cmp.csv())
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "break-even": cmd_break_even,
    "validate-bitcoin": cmd_validate_bitcoin,
    "ecip-demo": cmd_ecip_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "mode", None) == "bitcoin" and args.command != "validate-bitcoin":
            args.delta, args.uncle_strategy = 0.0, "none"
        _echo(args)
        for path in (args.out, getattr(args, "dump", None)):
            if path and path != "-":
                _check_writable(path)
        return COMMANDS[args.command](args)
    except ValidationError as e:
        print(f"unclesim: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ex.NoCrossingError as e:
        print(f"unclesim: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (OSError, IOError) as e:
        print(f"unclesim: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"unclesim: invalid configuration: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
