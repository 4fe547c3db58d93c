"""Command line entry: check a geometry file, run the corpus selftest, dump curvature."""
import argparse
import logging
import sys

import numpy as np

from ..exprkit import DomainEvaluationException, ExprException
from ..geocalc import DegenerateMetricException, GeometryException, JetException, curvature_bundle
from ..holonomy import HolonomyException
from .checker import CheckOptions, InternalConsistencyException, Tolerances, corpus_selftest, run_check, run_conformal_invariance
from .geometry_file import GeometryFile, InvalidGeometryFileException
from .report import encode_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def exit_code_for(error: Exception) -> int:
    if isinstance(error, (DegenerateMetricException, DomainEvaluationException, InternalConsistencyException)):
        return EXIT_NUMERICAL
    if isinstance(error, (HolonomyException, JetException, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    if isinstance(error, (InvalidGeometryFileException, GeometryException, ExprException, OSError)):
        return EXIT_INPUT
    return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feffcheck", description="Conformal tractor checks for Fefferman spaces")
    parser.add_argument("--verbose", action="store_true", help="log per-check detail")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="run the full pipeline on one geometry file")
    check.add_argument("file")
    check.add_argument("--tolerance", type=float, default=None, help="identity tolerance (default 1e-8)")
    check.add_argument("--samples", type=int, default=None)
    check.add_argument("--seed", type=int, default=None)
    check.add_argument("--json", action="store_true", help="print the JSON report")
    check.add_argument("--holonomy", action="store_true", help="transport around loops at the domain center")
    check.add_argument("--rescale", action="store_true", help="rerun with e^{2ω} g and compare")

    selftest = commands.add_parser("selftest", help="check every corpus file against its annotation")
    selftest.add_argument("--corpus", default=None, help="directory of geometry files (default: bundled corpus)")
    selftest.add_argument("--workers", type=int, default=1)
    selftest.add_argument("--summary", default=None, help="write the summary table to this parquet file")
    selftest.add_argument("--reports", default=None, help="write the JSON report of every corpus file into this directory")

    curvature = commands.add_parser("curvature", help="dump the curvature bundle at one point")
    curvature.add_argument("file")
    curvature.add_argument("--point", required=True, help="comma separated coordinates")
    return parser


def _options(args) -> CheckOptions:
    tolerances = Tolerances() if args.tolerance is None else Tolerances(identity=args.tolerance)
    return CheckOptions(
        tolerances=tolerances, samples=args.samples, seed=args.seed, holonomy=args.holonomy, rescale=args.rescale
    )


def command_check(args) -> int:
    geometry_file = GeometryFile.from_file(args.file)
    options = _options(args)
    report = run_check(geometry_file, options)
    if options.rescale:
        invariance = run_conformal_invariance(geometry_file, options)
        report.details["conformal_invariance"] = invariance["fragment"]
    if args.json:
        print(report.to_json())
    else:
        print(report.format_text())
        if options.rescale:
            fragment = report.details["conformal_invariance"]
            status = "PASS" if fragment["passed"] else "FAIL"
            print(f"{status} rescaled verdict {fragment['rescaled_verdict']}, max λ change {fragment['lambda_difference']:.3e}")
    return EXIT_OK


def command_selftest(args) -> int:
    status, summary = corpus_selftest(
        args.corpus, workers=args.workers, summary_path=args.summary, reports_dir=args.reports
    )
    if summary is None:
        print("no corpus")
        return status
    for row in summary.iter_rows(named=True):
        mark = "ok" if row["matched"] else "MISMATCH"
        print(f"{mark:8} {row['file']:40} {row['verdict'] or row['error']}")
    return status


def command_curvature(args) -> int:
    geometry_file = GeometryFile.from_file(args.file)
    try:
        point = [float(value) for value in args.point.split(",")]
    except ValueError:
        raise InvalidGeometryFileException(f"Point must be comma separated numbers, got {args.point!r}", args.file)
    if len(point) != geometry_file.spec.dimension:
        raise InvalidGeometryFileException(
            f"Point needs {geometry_file.spec.dimension} coordinates, got {len(point)}", args.file
        )
    bundle = curvature_bundle(geometry_file.spec, np.array([point]))
    print(encode_json(bundle.at_point(0)))
    return EXIT_OK


COMMANDS = {"check": command_check, "selftest": command_selftest, "curvature": command_curvature}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except Exception as error:
        code = exit_code_for(error)
        logger.error(f"{type(error).__name__}: {error}")
        print(f"error: {error}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
