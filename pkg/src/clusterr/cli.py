"""Command-line interface: ``clusterr cluster | simulate | quantile``.

Exit status is 0 on success, 1 on a usage, data or configuration error and
2 when no number of clusters up to the cap was accepted.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .data import load_csv
from .estimator import STATISTICS, CluStErrResult, EstimatorConfig, run
from .exceptions import CluStErrError, ConfigError
from .noise import METHODS, SegmentBoundaries
from .null import blocked_quantile, block_sizes_for, max_quantile
from .simulation import (SAMPLE_SIZE_LADDER, SAMPLE_SIZE_LADDER_ALT, DesignSpec, balanced_sizes,
                         default_config, replicate, unbalanced_sizes)

__all__ = ["EstimatorConfig", "build_parser", "main"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_ACCEPTANCE = 2

log = logging.getLogger("clusterr")


class _Parser(argparse.ArgumentParser):
    # usage errors share exit status 1 with data errors; 2 is reserved
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def parse_cutpoints(text: str) -> list[int]:
    try:
        cuts = [int(c) for c in text.split(",") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"segments must be a comma list of integers, got {text!r}")
    if not cuts:
        raise argparse.ArgumentTypeError("segments list is empty")
    return cuts


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_estimator_flags(p: argparse.ArgumentParser, center_default: bool) -> None:
    g = p.add_argument_group("estimator")
    g.add_argument("--alpha", type=float, default=0.05)
    g.add_argument("--statistic", choices=STATISTICS, default="max")
    g.add_argument("--block-size", type=_positive_int, default=None, help="block length N (default p)")
    g.add_argument("--variance-method", choices=METHODS, default=None)
    g.add_argument("--segments", type=parse_cutpoints, default=None,
                   help="comma list of 1-based cutpoints for the pc estimator")
    g.add_argument("--kmax", type=_positive_int, default=20, help="clusters used by the rss estimator")
    g.add_argument("--kcap", type=_positive_int, default=None, help="largest K tested (default min(n, 50))")
    g.add_argument("--max-iter", type=_positive_int, default=100)
    g.add_argument("--center", action=argparse.BooleanOptionalAction, default=center_default,
                   help="remove row means before clustering")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clusterr", description="Estimate the number of clusters with error control.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("cluster", help="estimate K and the partition of a CSV data matrix")
    c.add_argument("input", type=Path, help="CSV file, one subject per row")
    c.add_argument("--header", action="store_true", help="skip a header line")
    c.add_argument("--out-dir", type=Path, default=Path("."))
    _add_estimator_flags(c, center_default=True)

    s = sub.add_parser("simulate", help="replication study on the piecewise-constant design")
    s.add_argument("--seed", type=int, default=None, help="base seed; replication b uses seed + b (required)")
    s.add_argument("--reps", type=_positive_int, default=100)
    s.add_argument("--nsr", type=float, default=1.0)
    s.add_argument("--n", type=_positive_int, default=1000)
    s.add_argument("--p", type=_positive_int, default=30)
    bal = s.add_mutually_exclusive_group()
    bal.add_argument("--balanced", dest="balanced", action="store_true", default=True)
    bal.add_argument("--unbalanced", dest="balanced", action="store_false")
    preset = s.add_mutually_exclusive_group()
    preset.add_argument("--table1", action="store_true",
                        help="balanced (1000, 30) design with the pc estimator and max statistic")
    preset.add_argument("--table2", type=int, choices=range(1, 6), metavar="{1..5}",
                        help="point of the (n, p) ladder at the given position")
    preset.add_argument("--table4", action="store_true",
                        help="balanced (1000, 30) design with the blocked statistic, N = p")
    s.add_argument("--ladder-variant", choices=("header", "text"), default="header",
                   help="which (n, p) ladder --table2 indexes")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--out-dir", type=Path, default=Path("."))
    _add_estimator_flags(s, center_default=False)

    q = sub.add_parser("quantile", help="print the critical value q(alpha)")
    q.add_argument("--p", type=_positive_int, required=True)
    q.add_argument("--n", type=_positive_int, required=True)
    q.add_argument("--alpha", type=float, default=0.05)
    q.add_argument("--mode", choices=("max", "blocked"), default="max")
    q.add_argument("--block-size", type=_positive_int, default=None, help="block length N (default p)")
    return parser


def config_from_args(args, p: int) -> EstimatorConfig:
    segments = None
    if args.segments is not None:
        segments = SegmentBoundaries.from_cutpoints(args.segments, p)
    return EstimatorConfig(
        alpha=args.alpha,
        statistic=args.statistic,
        block_size=args.block_size,
        variance_method=args.variance_method,
        segments=segments,
        kmax=args.kmax,
        kcap=args.kcap,
        max_iter=args.max_iter,
        center=args.center,
    )


def result_to_dict(result: CluStErrResult) -> dict:
    part = result.partition
    return {
        "kHat": result.k_hat,
        "accepted": result.accepted,
        "assignments": None if part is None else [int(a) for a in part.assignment],
        "centers": None if part is None else part.centers.tolist(),
        "sigma2": result.noise.sigma2,
        "kappa": result.noise.kappa,
        "theta4": result.noise.theta4,
        "varianceMethod": result.noise.method,
        "pvalueIsProbability": result.trace.pvalue_is_probability,
        "trace": [
            {
                "K": r.K,
                "statistic": r.statistic,
                "pvalue": r.pvalue,
                "threshold": r.threshold,
                "rejected": r.rejected,
                "clusterSizes": list(r.cluster_sizes),
                "converged": r.converged,
                "nIter": r.n_iter,
            }
            for r in result.trace.records
        ],
        "config": result.config.to_dict(),
    }


def write_pvalues_csv(result: CluStErrResult, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["K", "statistic", "pvalue"])
        for r in result.trace.records:
            w.writerow([r.K, repr(r.statistic), repr(r.pvalue)])


def cmd_cluster(args) -> int:
    data = load_csv(args.input, has_header=args.header)
    cfg = config_from_args(args, data.p)
    result = run(data, cfg)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    (args.out_dir / "result.json").write_text(json.dumps(result_to_dict(result), indent=2) + "\n",
                                              encoding="utf-8")
    write_pvalues_csv(result, args.out_dir / "pvalues.csv")
    if not result.accepted:
        print(f"no K up to {result.config.kcap} was accepted", file=sys.stderr)
        return EXIT_NO_ACCEPTANCE
    print(f"kHat={result.k_hat} sigma2={result.noise.sigma2:.6g} kappa={result.noise.kappa:.6g}")
    return EXIT_OK


def _design_from_args(args) -> tuple[DesignSpec, EstimatorConfig]:
    if args.seed is None:
        raise ConfigError("simulate requires an explicit --seed")
    n, p, balanced = args.n, args.p, args.balanced
    statistic = args.statistic
    if args.table1 or args.table4:
        n, p, balanced = 1000, 30, True
        statistic = "blocked" if args.table4 else "max"
    elif args.table2 is not None:
        ladder = SAMPLE_SIZE_LADDER if args.ladder_variant == "header" else SAMPLE_SIZE_LADDER_ALT
        n, p = ladder[args.table2 - 1]
        balanced = True
    if p % 5:
        raise ConfigError(f"p must be divisible by 5 for this design, got p={p}")
    sizes = balanced_sizes(n) if balanced else unbalanced_sizes(n)
    spec = DesignSpec(n, p, sizes, args.nsr, args.seed)
    cfg = replace(config_from_args(args, p), statistic=statistic)
    if cfg.variance_method is None:
        cfg = replace(cfg, variance_method="pc")
    return spec, default_config(spec, cfg)


def cmd_simulate(args) -> int:
    spec, cfg = _design_from_args(args)
    report = replicate(spec, args.reps, cfg, workers=args.workers)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    report.write_json(args.out_dir / "report.json")
    report.write_histogram_csv(args.out_dir / "histogram.csv")
    f = report.frequencies()
    print(f"B={report.B} under={float(f['under']):.3f} exact={float(f['exact']):.3f} "
          f"over={float(f['over']):.3f} errors={report.n_errors}")
    return EXIT_OK


def cmd_quantile(args) -> int:
    if args.mode == "max":
        q = max_quantile(args.p, args.n, args.alpha)
    else:
        N = args.p if args.block_size is None else args.block_size
        if N > args.n:
            raise ConfigError(f"block size must lie in 1..{args.n}, got {N}")
        q = blocked_quantile(args.p, block_sizes_for(args.n, N), args.alpha, N)
    print(f"{q:.10g}")
    return EXIT_OK


COMMANDS = {"cluster": cmd_cluster, "simulate": cmd_simulate, "quantile": cmd_quantile}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CluStErrError, OSError) as exc:
        print(f"clusterr: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
