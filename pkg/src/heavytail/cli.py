"""Command line entry point: ``heavytail run | classify | oracle``."""

import argparse
import json
import sys

from . import __version__
from .distributions import LatticePolyTail, model_from_json
from .errors import ConfigInvalid, HeavyTailError, ReportIOError
from .lattice_oracle import exact_lattice_oracle
from .reporting import load_config, render_tables, run_scenario
from .rules import parse_rule
from .tail_analysis import Trend, classify_tail

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATOR = 3
EXIT_VERDICT = 4
EXIT_IO = 5


def _grid(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="heavytail", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config and write report.json plus CSV tables")
    run.add_argument("--config", required=True, help="scenario JSON file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=None, help="worker threads (default: $HEAVYTAIL_WORKERS or 1)")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")

    cl = sub.add_parser("classify", help="numerical tail-class check along a grid")
    cl.add_argument("--model", required=True, help='model JSON, e.g. \'{"family": "pareto_shift", "alpha": 2.5, "xm": 1, "b": 3}\'')
    cl.add_argument("--property", required=True, choices=["sstar", "lt", "subexp"])
    cl.add_argument("--grid", required=True, type=_grid, help="comma separated increasing x values")
    cl.add_argument("--tol", type=float, default=0.15)
    cl.add_argument("--expect", choices=[t.value for t in Trend], default=None,
                    help="exit with code 4 unless the trend matches")

    orc = sub.add_parser("oracle", help="exact P(max > x) for the lattice model")
    orc.add_argument("--x", required=True, type=int)
    orc.add_argument("--rule", required=True, help="tau | fixed:N | min:N")
    orc.add_argument("--q", type=float, default=0.7, help="down-step probability")
    orc.add_argument("--r", type=float, default=3.0, help="tail exponent")
    return p


def _run(args):
    cfg = load_config(args.config, seed=args.seed)
    bundle = run_scenario(cfg, workers=args.workers)
    paths = render_tables(bundle, args.out)
    for path in paths:
        print(path)
    for name in bundle.required:
        print(f"{'PASS' if bundle.verdicts[name] else 'FAIL'} {name}")
    return EXIT_OK if bundle.passed else EXIT_VERDICT


def _classify(args):
    try:
        model = model_from_json(json.loads(args.model))
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigInvalid({"model": str(exc)}) from exc
    verdict = classify_tail(model, args.grid, args.tol, args.property)
    print(json.dumps(verdict.to_json(), indent=2))
    if args.expect is not None and verdict.trend.value != args.expect:
        return EXIT_VERDICT
    return EXIT_OK


def _oracle(args):
    try:
        rule = parse_rule(args.rule)
        model = LatticePolyTail(args.q, args.r)
    except ValueError as exc:
        raise ConfigInvalid({"rule/model": str(exc)}) from exc
    result = exact_lattice_oracle(model, rule, args.x)
    print(json.dumps(result.to_json(), indent=2))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"run": _run, "classify": _classify, "oracle": _oracle}
    try:
        return handlers[args.command](args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReportIOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HeavyTailError, ValueError, TypeError) as exc:
        print(f"estimator error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR


if __name__ == "__main__":
    sys.exit(main())
