"""Command-line interface.

Subcommands::

    rmsgof models
    rmsgof level    --model NAME [model args] --counts FILE
    rmsgof simulate --model NAME [model args] --theta T --m M --j J --seed S --out FILE
    rmsgof cdf      --x X --variances LIST_OR_FILE [--verbose]

Scalar results go to stdout as JSON, vectors as CSV. Exit status: 0 on
success, 2 for usage errors, 3 for bad input data, 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .cdf import DEFAULT_ABS_TOL, MAX_DEPTH, RULE_ORDERS, UPPER_LIMIT, cdf_report
from .errors import DataError, GofError, InvalidCounts, OverflowMassTooLarge
from .models import (
    BUILTIN,
    DEFAULT_EPSILON,
    DEFAULT_MAX_BINS,
    BinCounts,
    InfiniteModel,
    get_model,
    load_tabulated_model,
)
from .montecarlo import SimulationConfig, qq_export, run_simulations
from .statistic import confidence_level

EXIT_USAGE = 2
EXIT_DATA = DataError.exit_code
EXIT_NUMERIC = 4


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _epsilon(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def _orders(text):
    try:
        low, high = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two integers LOW,HIGH") from None
    return low, high


def _add_model_args(p):
    g = p.add_argument_group("model selection")
    g.add_argument(
        "--model",
        choices=sorted(BUILTIN),
        help="built-in model (see the 'models' subcommand)",
    )
    g.add_argument(
        "--model-file",
        help="tabulated user model: a line 'n=<int>' then rows 'theta,p_1,...,p_n'; "
        "derivatives come from finite differences, so results are approximate",
    )
    g.add_argument("--n", type=_positive_int, default=100, help="number of bins for zipf (default: 100)")
    g.add_argument(
        "--epsilon",
        type=_epsilon,
        default=DEFAULT_EPSILON,
        help="poisson truncation: keep the fewest leading bins holding probability "
        "at least 1-epsilon (default: 1e-8)",
    )
    g.add_argument(
        "--max-bins",
        type=_positive_int,
        default=DEFAULT_MAX_BINS,
        help="largest number of bins truncation may keep (default: 1e6)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmsgof",
        description="Asymptotic confidence levels for the root-mean-square goodness-of-fit "
        "statistic with a one-parameter discrete model fitted by maximum likelihood.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("models", help="list built-in models and their formulas")

    p = sub.add_parser("level", help="confidence level for observed counts (JSON)")
    _add_model_args(p)
    p.add_argument(
        "--counts",
        required=True,
        help="CSV of 'bin_index,count' lines, 1-based; missing bins count as 0",
    )
    p.add_argument(
        "--abs-tol",
        type=_positive_float,
        default=DEFAULT_ABS_TOL,
        help="absolute quadrature tolerance (default: 1e-12)",
    )
    p.add_argument(
        "--dump-eigenvalues",
        metavar="CSV",
        help="debug: write all eigenvalues of the projected matrix, descending, as CSV",
    )

    p = sub.add_parser("simulate", help="Monte-Carlo check that levels are uniform under the model")
    _add_model_args(p)
    p.add_argument("--theta", type=float, required=True, help="true parameter for the draws")
    p.add_argument(
        "--m",
        type=_positive_int,
        default=20000,
        help="draws per simulation (default: 20000; 100000 for full-scale runs)",
    )
    p.add_argument(
        "--j",
        type=_positive_int,
        default=500,
        help="number of simulations (default: 500; 1000 or 10000 for full-scale runs)",
    )
    p.add_argument("--seed", type=_seed, default=0, help="master seed (default: 0)")
    p.add_argument("--out", required=True, help="Q-Q CSV output path ('grid,level' rows)")
    p.add_argument("--workers", type=_positive_int, default=1, help="threads (default: 1)")
    p.add_argument("--abs-tol", type=_positive_float, default=DEFAULT_ABS_TOL)

    p = sub.add_parser("cdf", help="CDF of a weighted sum of squared standard normals")
    p.add_argument("--x", type=float, required=True, help="point at which to evaluate; x <= 0 gives 0")
    p.add_argument(
        "--variances",
        required=True,
        help="comma-separated positive weights, or a file with one per line",
    )
    p.add_argument("--verbose", action="store_true", help="also print nodes_used and est_error")
    p.add_argument("--abs-tol", type=_positive_float, default=DEFAULT_ABS_TOL)
    p.add_argument(
        "--upper",
        type=_positive_float,
        default=UPPER_LIMIT,
        help="diagnostic: upper integration limit (default: 40)",
    )
    p.add_argument(
        "--max-depth",
        type=int,
        default=MAX_DEPTH,
        help="diagnostic: bisection depth limit (default: 50)",
    )
    p.add_argument(
        "--orders",
        type=_orders,
        default=RULE_ORDERS,
        help="diagnostic: Gauss-Legendre rule orders LOW,HIGH (default: 10,21)",
    )
    return parser


def _model_from_args(args, parser):
    if args.model_file:
        return load_tabulated_model(args.model_file)
    if not args.model:
        parser.error("one of --model or --model-file is required")
    return get_model(args.model, n=args.n, epsilon=args.epsilon, max_bins=args.max_bins)


def read_counts(path) -> BinCounts:
    pairs = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise InvalidCounts(f"{path}:{lineno}: expected 'bin_index,count'")
            try:
                k, c = int(row[0]), float(row[1])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise InvalidCounts(f"{path}:{lineno}: non-numeric entry {row!r}") from None
            pairs.append((k, c))
    return BinCounts.from_pairs(pairs)


def read_variances(text) -> np.ndarray:
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    items = [v for v in text.replace("\n", ",").split(",") if v.strip()]
    try:
        return np.array([float(v) for v in items], dtype=float)
    except ValueError:
        raise DataError(f"could not parse variances from {text[:60]!r}") from None


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_models(args, parser):
    out = []
    for name in sorted(BUILTIN):
        model = get_model(name)
        entry = {"name": name, "description": model.description, "theta_domain": list(model.theta_domain)}
        entry["args"] = {"contingency2x2": [], "zipf": ["--n"], "poisson": ["--epsilon", "--max-bins"]}[name]
        out.append(entry)
    _emit(out)
    return 0


def cmd_level(args, parser):
    model = _model_from_args(args, parser)
    counts = read_counts(args.counts)
    try:
        result = confidence_level(model, counts, abs_tol=args.abs_tol)
    except OverflowMassTooLarge as exc:
        _emit(
            {
                "confidence_level": 1.0,
                "p_value": 0.0,
                "overflow_fraction": exc.overflow_fraction,
                "epsilon": exc.epsilon,
                "note": str(exc),
            }
        )
        raise
    if args.dump_eigenvalues:
        lam = result.spectrum.eigenvalues
        with open(args.dump_eigenvalues, "w") as fh:
            fh.write(",".join(f"lambda_{i + 1}" for i in range(lam.size)) + "\n")
            fh.write(",".join(repr(float(v)) for v in lam) + "\n")
    out = result.to_dict()
    out["model"] = model.name
    _emit(out)
    return 0


def cmd_simulate(args, parser):
    model = _model_from_args(args, parser)
    epsilon = args.epsilon if isinstance(model, InfiniteModel) else None
    config = SimulationConfig(model, args.theta, args.m, args.j, args.seed, epsilon)
    report = run_simulations(config, workers=args.workers, abs_tol=args.abs_tol)
    qq_export(report, args.out)
    summary = report.summary()
    summary.update(model=model.name, theta=args.theta, m=args.m, seed=args.seed, out=args.out)
    _emit(summary)
    return 0


def cmd_cdf(args, parser):
    variances = read_variances(args.variances)
    report = cdf_report(
        args.x,
        variances,
        args.abs_tol,
        upper=args.upper,
        max_depth=args.max_depth,
        orders=args.orders,
    )
    print(f"{report.value:.15g}")
    if args.verbose:
        print(f"nodes_used={report.nodes_used} est_error={report.est_error:.3g}")
    return 0


COMMANDS = {"models": cmd_models, "level": cmd_level, "simulate": cmd_simulate, "cdf": cmd_cdf}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, parser)
    except GofError as exc:
        print(f"rmsgof: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"rmsgof: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
