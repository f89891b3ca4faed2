"""
Homogeneous Young measures of partitioned functions

Builds the measure of u by each characterization (atoms for piecewise
constant u, the inverse-Jacobian density, the image of the normalized
Lebesgue measure, the Stieltjes CDF of a single increasing piece) and checks
that they satisfy the fundamental identity and agree with each other.
"""

from typing import Dict, List, Optional, Sequence

import numpy as np

from .data import CrossReport, IdentityEntry, IdentityReport
from .errors import ConstructionError, OntoConditionError, ValidationError, YoungMeasureError
from .exprfn import (
    PartitionedFunction,
    evaluate_expression,
    inverse_derivative_values,
    invert_many,
    validate,
)
from .measures import (
    AbsContMeasure,
    AtomicMeasure,
    HomogeneousYoungMeasure,
    StieltjesMeasure,
    SupportInterval,
    TestFunction,
    cdf_grid,
    default_test_functions,
    integrate,
)
from .quadrature import DEFAULT_TOL, adaptive_quadrature
from .utils import logger

ATOM_MERGE_TOL = 1e-12
CROSS_GRID = 1025


def support_of(u: PartitionedFunction) -> SupportInterval:
    """Hull of the piece images; a single level is widened to unit length"""
    lo, hi = u.image
    if not hi > lo:
        lo, hi = lo - 0.5, hi + 0.5
    return SupportInterval(lo, hi)


def _require_valid(u: PartitionedFunction, K: Optional[SupportInterval] = None, onto: bool = False):
    report = validate(u, K)
    if not report.structurally_valid:
        raise ValidationError(report)
    if onto and not report.onto:
        raise OntoConditionError(report)
    return report


def atomic_young_measure(u: PartitionedFunction, K: Optional[SupportInterval] = None) -> AtomicMeasure:
    """sum_i (|Omega_i|/M) delta(c_i), equal levels merged"""
    if u.kind != "constant":
        raise ConstructionError("Atomic construction needs a piecewise-constant function")
    _require_valid(u, K)
    levels = sorted((piece.image[0], piece.length) for piece in u.pieces)
    atoms: List[list] = []
    for level, length in levels:
        if atoms and abs(level - atoms[-1][0]) <= ATOM_MERGE_TOL * max(1.0, abs(level)):
            atoms[-1][1] += length
        else:
            atoms.append([level, length])
    measure = AtomicMeasure(
        K or support_of(u),
        tuple((level, length / u.measure) for level, length in atoms),
    )
    logger.info(f"Built atomic measure with {len(atoms)} atom(s)")
    return measure


def density_young_measure(u: PartitionedFunction, K: SupportInterval) -> AbsContMeasure:
    """g(y) = (1/M) sum_i |(u_i^{-1})'(y)|; every piece must map onto K"""
    if u.kind != "invertible":
        raise ConstructionError("Density construction needs a piecewise-invertible function")
    _require_valid(u, K, onto=True)
    pieces, measure = u.pieces, u.measure

    def density(ys):
        ys = np.asarray(ys, dtype=float)
        total = np.zeros_like(ys)
        for piece in pieces:
            total += inverse_derivative_values(piece, ys)
        return total / measure

    singular = tuple(sorted({s for piece in pieces for s in piece.singular_values}))
    logger.info(f"Built density measure from {len(pieces)} piece(s), singular endpoints {list(singular)}")
    return AbsContMeasure(K, density, singular, label="density")


def _piece_counts(u: PartitionedFunction, strict: bool):
    """y -> (1/M) sum_i |{x in Omega_i : u_i(x) <= y}| (or < y when strict)"""
    pieces, measure = u.pieces, u.measure

    def count(ys):
        ys = np.asarray(ys, dtype=float)
        total = np.zeros_like(ys)
        for piece in pieces:
            lo, hi = piece.image
            if piece.is_constant:
                below = (lo < ys) if strict else (lo <= ys)
                total += np.where(below, piece.length, 0.0)
                continue
            total += np.where(ys >= hi, piece.length, 0.0)
            part = (ys > lo) & (ys < hi)
            if np.any(part):
                x = invert_many(piece, ys[part])
                inside = x - piece.left if piece.direction > 0 else piece.right - x
                total[part] += inside
        return total / measure

    return count


def pushforward_young_measure(u: PartitionedFunction, K: Optional[SupportInterval] = None) -> StieltjesMeasure:
    """Image of the normalized Lebesgue measure under u: F(y) = μ(u <= y)"""
    _require_valid(u, K)
    breakpoints = tuple(sorted({v for piece in u.pieces for v in piece.image}))
    logger.info(f"Built pushforward measure from {len(u.pieces)} piece(s)")
    return StieltjesMeasure(
        K or support_of(u),
        cdf=_piece_counts(u, strict=False),
        cdf_left=_piece_counts(u, strict=True),
        breakpoints=breakpoints,
        label="pushforward",
    )


def stieltjes_from_monotone(u: PartitionedFunction, K: Optional[SupportInterval] = None) -> StieltjesMeasure:
    """F = (u^{-1} - a)/M for a single strictly increasing piece"""
    if len(u.pieces) != 1:
        raise ConstructionError(f"Expected exactly one piece, got {len(u.pieces)}")
    piece = u.pieces[0]
    if u.kind != "invertible" or piece.direction != 1:
        raise ConstructionError(f"Piece {piece.source} is not strictly increasing; reflect it first")
    _require_valid(u, K)
    a, measure = u.domain[0], u.measure
    lo, hi = piece.image

    def stieltjes_cdf(ys):
        ys = np.asarray(ys, dtype=float)
        values = np.where(ys >= hi, 1.0, 0.0)
        part = (ys > lo) & (ys < hi)
        if np.any(part):
            values[part] = (invert_many(piece, ys[part]) - a) / measure
        return values

    return StieltjesMeasure(
        K or SupportInterval(lo, hi),
        cdf=stieltjes_cdf,
        breakpoints=(lo, hi),
        label="stieltjes",
    )


def _rhs(u: PartitionedFunction, beta: TestFunction, tol: float) -> float:
    """(1/M) ∫_Ω β(u(x)) dx, split at the partition knots"""
    total = 0.0
    share = tol * u.measure / len(u.pieces)
    for piece in u.pieces:
        result = adaptive_quadrature(
            lambda xs, piece=piece: beta(evaluate_expression(piece.expr, xs)),
            (piece.left, piece.right),
            share,
        )
        total += result.value
    return total / u.measure


def verify_fundamental_identity(
    u: PartitionedFunction,
    nu: HomogeneousYoungMeasure,
    betas: Sequence[TestFunction],
    tol: float = 1e-7,
) -> IdentityReport:
    """∫_K β dν against ∫_Ω β(u(x)) dμ(x) for every β"""
    _require_valid(u)
    report = IdentityReport(variant=nu.variant)
    for beta in betas:
        try:
            lhs = integrate(nu, beta, tol / 4)
            rhs = _rhs(u, beta, tol / 4)
        except YoungMeasureError as e:
            logger.error(f"Identity check for beta={beta.label} failed: {e}")
            report.entries.append(IdentityEntry(beta.label, None, None, None, tol, False, str(e)))
            continue
        difference = abs(lhs - rhs)
        passed = difference <= tol
        logger.debug(f"beta={beta.label}: lhs={lhs!r} rhs={rhs!r} diff={difference:.3g}")
        report.entries.append(IdentityEntry(beta.label, lhs, rhs, difference, tol, passed))
    logger.info(
        f"Fundamental identity ({nu.variant}): {len(report.entries) - len(report.failures)}"
        f"/{len(report.entries)} test functions pass"
    )
    return report


def build_measures(u: PartitionedFunction, K: Optional[SupportInterval] = None) -> Dict[str, HomogeneousYoungMeasure]:
    """Every representation that applies to u"""
    support = K or support_of(u)
    report = _require_valid(u, support)
    measures: Dict[str, HomogeneousYoungMeasure] = {}
    if u.kind == "constant":
        measures["atomic"] = atomic_young_measure(u, support)
    elif report.onto:
        measures["density"] = density_young_measure(u, support)
    else:
        logger.warning("Onto condition fails for some piece; density representation skipped")
    measures["pushforward"] = pushforward_young_measure(u, support)
    if (
        u.kind == "invertible"
        and len(u.pieces) == 1
        and u.pieces[0].direction == 1
        and report.onto
    ):
        measures["stieltjes"] = stieltjes_from_monotone(u, support)
    return measures


def cross_validate(
    u: PartitionedFunction,
    tol: float = 1e-9,
    K: Optional[SupportInterval] = None,
    grid: int = CROSS_GRID,
    betas: Optional[Sequence[TestFunction]] = None,
) -> CrossReport:
    """Sup-norm CDF discrepancy between every pair of representations"""
    measures = build_measures(u, K)
    names = list(measures)
    support = next(iter(measures.values())).support
    ys = support.grid(grid)
    cdfs = {name: cdf_grid(nu, ys, DEFAULT_TOL) for name, nu in measures.items()}

    cdf_discrepancies, integral_discrepancies = {}, {}
    for i, first in enumerate(names):
        for second in names[i + 1:]:
            gap = float(np.max(np.abs(cdfs[first] - cdfs[second])))
            cdf_discrepancies[f"{first}~{second}"] = gap
            logger.debug(f"CDF discrepancy {first} vs {second}: {gap:.3g}")

    for beta in betas if betas is not None else default_test_functions():
        values = [integrate(nu, beta, DEFAULT_TOL * 100) for nu in measures.values()]
        integral_discrepancies[beta.label] = float(max(values) - min(values))

    note = "" if len(names) > 1 else "only one representation applies"
    report = CrossReport(names, cdf_discrepancies, integral_discrepancies, tol, grid, note)
    logger.info(f"Cross-validation over {names}: {'pass' if report.passed else 'FAIL'}")
    return report
