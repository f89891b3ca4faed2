"""
ym - command-line front end

    ym compute  SPEC            measure reports and CDF/density grids
    ym verify   SPEC            fundamental identity, cross-validation, Monte-Carlo KS
    ym converge DIR | --oscillate BASE
                                density/measure probes and their equivalence
    ym monotone DIR             monotone density scenario

Exit codes: 0 ok, 1 a check failed, 2 structural validation failure,
3 I/O error, 4 parse or usage error or nothing to do.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .construct import (
    build_measures,
    cross_validate,
    density_young_measure,
    pushforward_young_measure,
    support_of,
    verify_fundamental_identity,
)
from .convergence import (
    MeasureSequence,
    composition_limit_probe,
    equivalence_check,
    generate_test_sets,
    monotone_density_scenario,
    oscillating_sequence,
    oscillation_levels,
    weak_l1_probe,
    weak_measure_probe,
)
from .data import INCONSISTENT, RunConfig
from .errors import (
    ConstructionError,
    ExpressionError,
    FamilyMismatchError,
    SequenceError,
    SpecError,
    ValidationError,
    YoungMeasureError,
)
from .exprfn import validate
from .measures import (
    TestFunction,
    default_test_functions,
    measure_problems,
    measure_report,
)
from .oracle import ks_report, monte_carlo_pushforward
from .specs import DensitySpec, FunctionSpec, load_directory, load_spec, sequence_index
from .utils import logger, setup_logger, write_csv, write_report

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_PARSE = 4

DEFAULTS = RunConfig()


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with EXIT_PARSE; 2 stays reserved for invalid input"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ym", description="Homogeneous Young measures of piecewise functions")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("-o", "--output", type=Path, default=Path(DEFAULTS.output_dir), help="output directory")
        sub.add_argument("--grid", type=int, default=DEFAULTS.grid, help="report grid points")
        sub.add_argument("--tol", type=float, default=None, help="tolerance")

    def sequence_flags(sub):
        sub.add_argument("--depth", type=int, default=DEFAULTS.depth, help="dyadic test-set depth")
        sub.add_argument("--window", type=int, default=DEFAULTS.window, help="Cauchy window")

    compute = commands.add_parser("compute", help="build every applicable measure representation")
    compute.add_argument("spec", type=Path)
    common(compute)

    verify = commands.add_parser("verify", help="check the identity, cross-validate, compare with sampling")
    verify.add_argument("spec", type=Path)
    verify.add_argument("--beta", action="append", default=[], help="extra test function in y (repeatable)")
    verify.add_argument("--samples", type=int, default=DEFAULTS.samples)
    verify.add_argument("--seed", type=int, default=DEFAULTS.seed)
    common(verify)

    converge = commands.add_parser("converge", help="weak-convergence probes over a sequence")
    converge.add_argument("directory", type=Path, nargs="?", help="directory of numbered spec files")
    converge.add_argument("--oscillate", type=Path, help="base spec to rescale periodically")
    converge.add_argument("--levels", type=int, default=DEFAULTS.levels, help="oscillation levels 1, 2, 4, ...")
    converge.add_argument("--beta", default="y^2", help="f in the composition limit (with --oscillate)")
    converge.add_argument("--weight", default="x", help="w in the composition limit (with --oscillate)")
    sequence_flags(converge)
    common(converge)

    monotone = commands.add_parser("monotone", help="monotone density scenario over a directory")
    monotone.add_argument("directory", type=Path)
    sequence_flags(monotone)
    common(monotone)
    return parser


def _log_validation(error: ValidationError):
    for check in error.report.failures:
        logger.error(f"Validation failure {check.name}: {check.detail or 'failed'}")


def _function_spec(path: Path) -> FunctionSpec:
    spec = load_spec(path)
    if not isinstance(spec, FunctionSpec):
        raise SpecError(f"{path}: expected a function spec")
    return spec


def _grid_rows(report: dict):
    ys, cdf = report["grid"], report["cdf"]
    if "density" in report:
        return ["y", "cdf", "density"], zip(ys, cdf, report["density"])
    return ["y", "cdf"], zip(ys, cdf)


def cmd_compute(args) -> int:
    spec = load_spec(args.spec)
    payload = {"command": "compute", "input": args.spec.name}
    if isinstance(spec, DensitySpec):
        measures = {"density": spec.measure}
    else:
        u = spec.function
        K = spec.K or support_of(u)
        report = validate(u, K)
        payload["validation"] = report.to_dict()
        if not report.structurally_valid:
            raise ValidationError(report)
        measures = build_measures(u, K)

    payload["measures"] = {}
    for name, nu in measures.items():
        described = measure_report(nu, args.grid)
        described["problems"] = measure_problems(nu, args.tol or DEFAULTS.cdf_tol)
        payload["measures"][name] = described
        header, rows = _grid_rows(described)
        write_csv(args.output / f"{args.spec.stem}.{name}.csv", header, rows)
    path = write_report(args.output / f"{args.spec.stem}.compute.json", payload)
    logger.info(f"Wrote {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = load_spec(args.spec)
    tol = args.tol or DEFAULTS.identity_tol
    failures: List[str] = []
    payload = {"command": "verify", "input": args.spec.name, "tolerance": tol}

    if isinstance(spec, DensitySpec):
        problems = measure_problems(spec.measure, DEFAULTS.cdf_tol)
        payload["problems"] = {"density": problems}
        failures += [f"density: {problem}" for problem in problems]
    else:
        u = spec.function
        K = spec.K or support_of(u)
        report = validate(u, K)
        payload["validation"] = report.to_dict()
        if not report.structurally_valid:
            raise ValidationError(report)
        betas = default_test_functions(args.beta)
        measures = build_measures(u, K)

        payload["problems"], payload["identity"], payload["ks"] = {}, {}, {}
        for name, nu in measures.items():
            problems = measure_problems(nu, DEFAULTS.cdf_tol)
            payload["problems"][name] = problems
            failures += [f"{name}: {problem}" for problem in problems]
            identity = verify_fundamental_identity(u, nu, betas, tol)
            payload["identity"][name] = identity.to_dict()
            failures += [f"{name}: identity fails for beta={entry.label}" for entry in identity.failures]

        cross = cross_validate(u, DEFAULTS.cdf_tol, K, args.grid, betas)
        payload["cross"] = cross.to_dict()
        if not cross.passed:
            failures += [
                f"cross-validation {pair}: CDF discrepancy {gap:.3g}"
                for pair, gap in cross.cdf_discrepancies.items()
                if gap > cross.tolerance
            ]

        sample = monte_carlo_pushforward(u, args.samples, args.seed)
        for name, nu in measures.items():
            ks = ks_report(sample, nu, DEFAULTS.ks_threshold)
            payload["ks"][name] = ks.to_dict()
            if not ks.passed:
                failures.append(f"{name}: KS distance {ks.distance:.3g} >= {ks.threshold:g}")

    payload["failures"] = failures
    payload["passed"] = not failures
    path = write_report(args.output / f"{args.spec.stem}.verify.json", payload)
    logger.info(f"Wrote {path}")
    for failure in failures:
        logger.error(f"Check failed - {failure}")
    return EXIT_CHECK_FAILED if failures else EXIT_OK


def _sequences_from_directory(directory: Path):
    specs = load_directory(directory)
    if not specs:
        raise SpecError(f"{directory}: no spec files, nothing to do")
    indices = tuple(sequence_index(spec, k) for k, spec in enumerate(specs))
    if all(isinstance(spec, DensitySpec) for spec in specs):
        measures = MeasureSequence(
            tuple(spec.measure for spec in specs), indices, metadata={"representation": "density"}
        ).check_masses()
        return measures, measures
    if not all(isinstance(spec, FunctionSpec) for spec in specs):
        raise SpecError(f"{directory}: function specs and density specs cannot be mixed")
    us = tuple(spec.function for spec in specs)
    supports = [spec.K or support_of(spec.function) for spec in specs]
    nus = MeasureSequence(
        tuple(pushforward_young_measure(u, K) for u, K in zip(us, supports)), indices, us
    ).check_masses()
    if all(u.kind == "constant" for u in us):
        return None, nus
    gs = MeasureSequence(
        tuple(density_young_measure(u, K) for u, K in zip(us, supports)), indices, us
    ).check_masses()
    return gs, nus


def _write_matrix(path: Path, report):
    write_csv(path, ["set", *report.indices], report.matrix_rows())


def cmd_converge(args) -> int:
    if (args.directory is None) == (args.oscillate is None):
        raise SpecError("give either a spec directory or --oscillate BASE")
    tol = args.tol or DEFAULTS.convergence_tol
    payload = {"command": "converge"}
    composition = None
    if args.oscillate is not None:
        spec = _function_spec(args.oscillate)
        base, K = spec.function, spec.K or support_of(spec.function)
        levels = oscillation_levels(args.levels)
        us = [oscillating_sequence(base, level) for level in levels]
        gs = None if base.kind == "constant" else MeasureSequence.densities_of(us, levels, K)
        nus = MeasureSequence.pushforwards_of(us, levels, K)
        composition = composition_limit_probe(base, levels, TestFunction.parse(args.beta), args.weight, K=K)
        stem = f"{args.oscillate.stem}.oscillate"
        payload["input"] = args.oscillate.name
    else:
        gs, nus = _sequences_from_directory(args.directory)
        stem = args.directory.name
        payload["input"] = args.directory.name

    support = nus.support if gs is None else gs.support.hull(nus.support)
    family = generate_test_sets(support, args.depth)
    density_report = None if gs is None else weak_l1_probe(gs, family, tol, args.window)
    measure_report_ = weak_measure_probe(nus, family, tol, args.window)
    equivalence = equivalence_check(density_report, measure_report_, tol)

    payload["density"] = None if density_report is None else density_report.to_dict()
    payload["measure"] = measure_report_.to_dict()
    payload["equivalence"] = equivalence.to_dict()
    if composition is not None:
        payload["composition"] = composition.to_dict()
    if density_report is not None:
        _write_matrix(args.output / f"{stem}.density.csv", density_report)
    _write_matrix(args.output / f"{stem}.measure.csv", measure_report_)
    path = write_report(args.output / f"{stem}.converge.json", payload)
    logger.info(f"Wrote {path}")

    if not equivalence.passed or INCONSISTENT in equivalence.verdicts.values():
        logger.error(f"Convergence check failed: {equivalence.status}, verdicts {equivalence.verdicts}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_monotone(args) -> int:
    specs = load_directory(args.directory)
    if not specs:
        raise SpecError(f"{args.directory}: no spec files, nothing to do")
    if not all(isinstance(spec, FunctionSpec) for spec in specs):
        raise SpecError(f"{args.directory}: the monotone scenario needs function specs")
    indices = tuple(sequence_index(spec, k) for k, spec in enumerate(specs))
    sequence = MeasureSequence.monotone_of([spec.function for spec in specs], indices)
    family = generate_test_sets(sequence.support, args.depth)
    report = monotone_density_scenario(sequence, family, args.tol or DEFAULTS.convergence_tol, args.window)
    payload = {"command": "monotone", "input": args.directory.name, "scenario": report.to_dict()}
    path = write_report(args.output / f"{args.directory.name}.monotone.json", payload)
    logger.info(f"Wrote {path}")
    if not report.passed:
        if report.witness:
            logger.error(f"Monotonicity fails; witness set {report.witness}")
        else:
            logger.error(f"Scenario fails: bounded={report.bounded}, converged={report.converged}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


COMMANDS = {
    "compute": cmd_compute,
    "verify": cmd_verify,
    "converge": cmd_converge,
    "monotone": cmd_monotone,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_PARSE
    if args.verbose:
        setup_logger(logging.DEBUG)
    elif args.quiet:
        setup_logger(logging.WARNING)
    else:
        setup_logger(logging.INFO)

    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        _log_validation(e)
        return EXIT_INVALID
    except (SequenceError, ConstructionError, FamilyMismatchError) as e:
        logger.error(str(e))
        return EXIT_INVALID
    except (SpecError, ExpressionError) as e:
        logger.error(f"Parse error: {e}")
        return EXIT_PARSE
    except ValueError as e:
        logger.error(f"Invalid argument: {e}")
        return EXIT_PARSE
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except YoungMeasureError as e:
        logger.error(str(e))
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
