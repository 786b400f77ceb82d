"""Command-line entry point: ``depthscan {detect,test,simulate,benchmark}``.

Exit codes: 0 on success, 2 for malformed input or invalid options, 3 for
numerical failures (non-positive-definite covariances, failed fits).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BENCH_CONFIG, SCALES, benchmark_table
from .core import (
    BivariateFunctionalSample,
    DepthScanError,
    FitFailure,
    ModelSpec,
    NotPositiveDefinite,
    OutOfRange,
)
from .depth import pwd_matrix, pwd_matrix_bivariate
from .detect import DetectConfig, detect
from .io import (
    read_bivariate,
    read_curves,
    report_document,
    write_curves,
    write_labels,
    write_plot_data,
    write_report,
)
from .shapetest import existence_test
from .simulate import generate

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _load(paths, bivariate: bool):
    if len(paths) > 2:
        raise OutOfRange("expected one curve file, or two component files")
    if len(paths) == 2:
        return read_bivariate(paths[0], paths[1])
    if bivariate:
        return read_bivariate(paths[0])
    return read_curves(paths[0])


def _print_ids(label, ids):
    print(f"{label} ({len(ids)}): {' '.join(ids) if ids else '-'}")


def _detect_config(args) -> DetectConfig:
    for name in ("factor_shape", "factor_mag"):
        if getattr(args, name) < 0:
            raise OutOfRange(f"--{name.replace('_', '-')} must be non-negative")
    return DetectConfig(args.factor_shape, args.factor_mag, args.coverage, magnitude=not args.shape_only)


def cmd_detect(args) -> int:
    sample = _load(args.input, args.bivariate)
    config = _detect_config(args)
    report = detect(sample, config)
    doc = report_document(sample, report, config, version=__version__)
    _print_ids("magnitude", doc["magnitude"])
    _print_ids("shape", doc["shape"])
    if args.out:
        write_report(args.out, doc)
    if args.plot_data:
        bivariate = isinstance(sample, BivariateFunctionalSample)
        depths = (pwd_matrix_bivariate(sample) if bivariate else pwd_matrix(sample)).values
        write_plot_data(args.plot_data, sample, report, depths)
    return 0


def cmd_test(args) -> int:
    if not 0.0 < args.alpha < 0.5:
        raise OutOfRange(f"alpha must lie in (0, 0.5), got {args.alpha}")
    if args.B < 1:
        raise OutOfRange("--B must be at least 1")
    sample = read_curves(args.input)
    config = DetectConfig()
    report = detect(sample, config)
    result = existence_test(sample, alpha=args.alpha, B=args.B, seed=args.seed)
    report = dataclasses.replace(report, test_result=result)
    print("REJECT" if result.reject else "FAIL-TO-REJECT")
    print(f"T = {result.statistic:.6g}, critical value = {result.critical_value:.6g}, "
          f"alpha = {result.alpha:g}, B = {result.B}", file=sys.stderr)
    if args.out:
        write_report(args.out, report_document(sample, report, config, seed=args.seed, version=__version__))
    return 0


def cmd_simulate(args) -> int:
    overrides = {k: v for k, v in (("k", args.k), ("mu", args.mu), ("c", args.c)) if v is not None}
    spec = ModelSpec(args.model, n=args.n, p=args.p, theta=args.theta, seed=args.seed, overrides=overrides)
    labeled = generate(spec)
    prefix = Path(args.out)
    if prefix.parent and not prefix.parent.exists():
        prefix.parent.mkdir(parents=True)
    written = write_curves(prefix.parent / f"{prefix.name}.csv", labeled.sample)
    labels_path = prefix.parent / f"{prefix.name}_labels.csv"
    write_labels(labels_path, labeled.sample.ids, labeled.labels)
    for path in written + [labels_path]:
        print(path)
    return 0


def cmd_benchmark(args) -> int:
    if args.replicates is not None and args.replicates < 1:
        raise OutOfRange("--replicates must be at least 1")
    config = DetectConfig(args.factor_shape, BENCH_CONFIG.factor_magnitude, BENCH_CONFIG.coverage,
                          magnitude=args.both_stages)
    rows = benchmark_table(args.table, replicates=args.replicates, scale=args.scale, seed=args.seed,
                           config=config, p=args.p, B=args.B)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    csv.writer(sys.stdout, lineterminator="\n").writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depthscan", description="Depth-based functional outlier detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="flag magnitude and shape outliers in a curve file")
    p.add_argument("input", nargs="+", help="curve file, or two component files for bivariate data")
    p.add_argument("--factor-shape", type=float, default=3.0)
    p.add_argument("--factor-mag", type=float, default=1.5)
    p.add_argument("--coverage", type=float, default=0.5)
    p.add_argument("--bivariate", action="store_true", help="read a long-format file with a component column")
    p.add_argument("--shape-only", action="store_true", help="skip the functional boxplot stage")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--plot-data", help="directory for plot-data CSVs")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("test", help="bootstrap test for the presence of shape outliers")
    p.add_argument("input")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--B", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="write a simulated sample and its outlier labels")
    p.add_argument("--model", default="U1")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=int, default=50)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--out", default="sample", help="output prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="reproduce a results table for the proposed method")
    p.add_argument("--table", required=True, choices=["1", "2", "3", "a1", "a2"])
    p.add_argument("--replicates", type=int)
    p.add_argument("--scale", default="desk", choices=sorted(SCALES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=int, help="grid size (default 50)")
    p.add_argument("--B", type=int, help="bootstrap size for table 3")
    p.add_argument("--factor-shape", type=float, default=BENCH_CONFIG.factor_shape)
    p.add_argument("--both-stages", action="store_true", help="also count magnitude flags as detections")
    p.add_argument("--out", help="CSV path (the table is also printed)")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (NotPositiveDefinite, FitFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"depthscan: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DepthScanError, OSError) as exc:
        print(f"depthscan: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
