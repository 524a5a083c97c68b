"""Command-line front end: ``fou2 <subcommand> …``.

Exit codes: 0 success, 1 numerical failure, 2 usage or validation error.
Floats are printed with 17 significant digits.
"""

import argparse
import contextlib
import logging
import sys

import numpy as np

from . import __version__
from .estimators import (DEFAULT_BRACKET, ESTIMATORS, apply_estimator, asymptotic_variance,
                         asymptotic_variance_upper_bound, correction_limit, correction_with_error)
from .exceptions import (DegeneratePathError, DomainError, EstimatorRangeError, ExperimentError,
                         FactorizationError, GridCapError, QuadratureError, EmbeddingError)
from .fbm import GRID_CAP_ENV, TimeGrid, sample_fbm_exact
from .harness import load_config, run_experiment, write_report
from .model import ModelParams, SimConfig, read_path, simulate_x, write_path
from .numerics import RngStream

log = logging.getLogger("fou2")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
NUMERIC_ERRORS = (GridCapError, EstimatorRangeError, DegeneratePathError, QuadratureError,
                  FactorizationError, EmbeddingError, ExperimentError, FloatingPointError,
                  np.linalg.LinAlgError)


def _g(x):
    return f"{x:.17g}"


class UsageError(Exception):
    pass


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _parse_grid(spec):
    if spec.startswith("uniform:"):
        try:
            T, n = spec[len("uniform:"):].split(",")
            return TimeGrid.uniform(float(T), int(n))
        except ValueError as exc:
            raise UsageError(f"--grid uniform:T,n expects a horizon and a step count, got {spec!r}") from exc
    try:
        with open(spec, encoding="utf-8") as fh:
            times = [float(line.split(",")[0]) for line in fh
                     if line.strip() and not line.lstrip().startswith("#")
                     and not line.strip().startswith("t")]
    except OSError as exc:
        raise UsageError(f"cannot read grid file {spec!r}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"grid file {spec!r} has a non-numeric time: {exc}") from exc
    return TimeGrid(np.array(times))


def cmd_sample_fbm(args):
    grid = _parse_grid(args.grid)
    path = sample_fbm_exact(grid, args.hurst, RngStream(args.seed, args.stream))
    header = {"kind": "fbm", "hurst": _g(args.hurst), "seed": args.seed, "stream": args.stream,
              "grid": args.grid, "version": __version__}
    with _output(args.out) as fh:
        write_path(path, fh, header)
    return EXIT_OK


def cmd_simulate(args):
    params = ModelParams(args.theta, args.hurst)
    cfg = SimConfig(args.T, args.dt, args.scheme, args.route)
    path = simulate_x(params, cfg, RngStream(args.seed, args.stream))
    header = {"kind": "fou2", "theta": _g(params.theta), "hurst": _g(params.hurst),
              "T": _g(cfg.horizon), "dt": _g(cfg.step), "route": cfg.sampler,
              "scheme": cfg.scheme, "seed": args.seed, "stream": args.stream,
              "version": __version__}
    with _output(args.out) as fh:
        write_path(path, fh, header)
    return EXIT_OK


def cmd_estimate(args):
    if args.estimator in ("moment", "lse-corrected") and args.hurst is None:
        raise UsageError(f"--hurst is required for the {args.estimator} estimator")
    if args.estimator == "lse-corrected" and args.theta is None:
        raise UsageError("--theta is required for the lse-corrected estimator")
    try:
        with open(args.inp, encoding="utf-8") as fh:
            path, _ = read_path(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {args.inp!r}: {exc}") from exc
    params = ModelParams(args.theta, args.hurst) if args.theta is not None else None
    res = apply_estimator(args.estimator, path, params, args.hurst, None, tuple(args.bracket))
    line = (f"estimator={res.label} theta_hat={_g(res.theta_hat)} denominator={_g(res.denominator)} "
            f"correction={_g(res.correction)} T={_g(res.horizon)}\n")
    with _output(args.out) as fh:
        fh.write(line)
    return EXIT_OK


def cmd_variance(args):
    params = ModelParams(args.theta, args.hurst)
    res = (asymptotic_variance_upper_bound if args.upper_bound else asymptotic_variance)(params)
    print(f"sigma_squared={_g(res.sigma_squared)} error_bound={_g(res.error_bound)}")
    return EXIT_OK


def cmd_correction(args):
    params = ModelParams(args.theta, args.hurst)
    if not args.T > 0:
        raise DomainError(f"--T must be positive, got {args.T!r}")
    val, err = correction_with_error(args.T, params)
    print(f"correction={_g(val)} error_bound={_g(err)} per_unit_time={_g(val / args.T)} "
          f"limit={_g(correction_limit(params))}")
    return EXIT_OK


def cmd_experiment(args):
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    if args.workers < 1:
        raise UsageError(f"--workers must be positive, got {args.workers}")
    try:
        report = run_experiment(cfg, workers=args.workers)
    except ExperimentError as exc:
        if exc.report is not None:
            write_report(exc.report, args.out_dir, args.workers)
        raise
    paths = write_report(report, args.out_dir, args.workers)
    for p in paths:
        print(p)
    return EXIT_OK


def _bracket(text):
    try:
        lo, hi = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}") from None
    return lo, hi


def build_parser():
    p = argparse.ArgumentParser(prog="fou2", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample-fbm", help="exact fractional Brownian motion on a grid")
    s.add_argument("--hurst", type=float, required=True)
    s.add_argument("--grid", required=True, help="uniform:T,n or a file of times")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_sample_fbm)

    s = sub.add_parser("simulate", help="zero-start fOU2 path")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--hurst", type=float, required=True)
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--dt", type=float, default=0.025)
    s.add_argument("--route", choices=("exact", "stationary"), default="exact")
    s.add_argument("--scheme", choices=("left", "trapezoid"), default="trapezoid")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="drift estimate from a path file")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--estimator", choices=ESTIMATORS, required=True)
    s.add_argument("--hurst", type=float)
    s.add_argument("--theta", type=float, help="true drift for the lse-corrected correction")
    s.add_argument("--bracket", type=_bracket, default=DEFAULT_BRACKET)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("variance", help="asymptotic variance sigma^2(theta, H)")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--hurst", type=float, required=True)
    s.add_argument("--upper-bound", action="store_true",
                   help="integrate with exp(-theta|z-x|) replaced by 1")
    s.set_defaults(func=cmd_variance)

    s = sub.add_parser("correction", help="Skorokhod correction on [0, T] and its limit")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--hurst", type=float, required=True)
    s.add_argument("--T", type=float, required=True)
    s.set_defaults(func=cmd_correction)

    s = sub.add_parser("experiment", help="Monte Carlo experiment from an INI config",
                       epilog=f"{GRID_CAP_ENV} overrides the exact-sampler grid cap (default 8192).")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"fou2 {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DomainError, ValueError) as exc:
        print(f"fou2 {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
