"""
Homogeneous Young measures on a compact interval K

A homogeneous Young measure is one probability measure on K used for every
x in the domain, so a single value answers every query. Three concrete
representations are provided: atomic, absolutely continuous (density) and
Lebesgue-Stieltjes (CDF).
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, ClassVar, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .exprfn import (
    ExpressionAst,
    differentiate,
    evaluate_expression,
    format_expression,
    parse_expression,
)
from .quadrature import DEFAULT_TOL, adaptive_quadrature, cumulative_quadrature
from .utils import logger

MASS_TOL = 1e-9
ATOM_MASS_TOL = 1e-12
SUPPORT_SLACK = 1e-12
REPORT_GRID = 1025

DEFAULT_BETAS = ("1", "y", "y^2", "sin(y)", "exp(y)")


@dataclass(frozen=True)
class SupportInterval:
    """Closed interval K = [lower, upper] with lower < upper"""

    lower: float
    upper: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper) and self.lower < self.upper):
            raise ValueError(f"Support [{self.lower}, {self.upper}] must satisfy c < d")

    def __iter__(self):
        yield self.lower
        yield self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def slack(self) -> float:
        return SUPPORT_SLACK * max(1.0, abs(self.lower), abs(self.upper))

    def contains(self, y: float) -> bool:
        return self.lower - self.slack <= y <= self.upper + self.slack

    def grid(self, points: int = REPORT_GRID) -> np.ndarray:
        return np.linspace(self.lower, self.upper, points)

    def hull(self, other: "SupportInterval") -> "SupportInterval":
        return SupportInterval(min(self.lower, other.lower), max(self.upper, other.upper))

    def to_list(self) -> list:
        return [self.lower, self.upper]


@dataclass(frozen=True)
class TestFunction:
    """A parsed scalar expression β(y) used as a test function on K"""

    __test__ = False

    expr: ExpressionAst
    label: str

    @classmethod
    def parse(cls, source: str, label: Optional[str] = None) -> "TestFunction":
        return cls(parse_expression(source, "y"), label or source)

    @cached_property
    def derivative(self) -> ExpressionAst:
        return differentiate(self.expr)

    def __call__(self, ys):
        return evaluate_expression(self.expr, ys)

    def prime(self, ys):
        return evaluate_expression(self.derivative, ys)


ONE = TestFunction.parse("1")


def default_test_functions(extra: Sequence[str] = ()) -> List[TestFunction]:
    """The default β suite {1, y, y^2, sin y, exp y} plus user expressions"""
    return [TestFunction.parse(source) for source in (*DEFAULT_BETAS, *extra)]


def _end_label(value: float) -> str:
    """Short form when it round-trips, otherwise the exact repr"""
    short = f"{value:g}"
    return short if float(short) == value else repr(value)


@dataclass(frozen=True)
class BorelTestSet:
    """Finite union of disjoint closed intervals"""

    intervals: Tuple[Tuple[float, float], ...]
    label: str = ""

    def __post_init__(self):
        ordered = tuple(sorted((float(lo), float(hi)) for lo, hi in self.intervals))
        for lo, hi in ordered:
            if not lo <= hi:
                raise ValueError(f"Interval [{lo}, {hi}] is reversed")
        for (_, first_hi), (second_lo, _) in zip(ordered, ordered[1:]):
            if not first_hi < second_lo:
                raise ValueError(f"Intervals of {self.label or ordered} are not disjoint")
        object.__setattr__(self, "intervals", ordered)
        if not self.label:
            text = " u ".join(f"[{_end_label(lo)},{_end_label(hi)}]" for lo, hi in ordered)
            object.__setattr__(self, "label", text)

    @property
    def length(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)

    def within(self, support: SupportInterval) -> bool:
        return all(support.contains(lo) and support.contains(hi) for lo, hi in self.intervals)

    def clip(self, support: SupportInterval) -> "BorelTestSet":
        """Intersection with K (possibly empty)"""
        parts = []
        for lo, hi in self.intervals:
            lo, hi = max(lo, support.lower), min(hi, support.upper)
            if lo <= hi:
                parts.append((lo, hi))
        return BorelTestSet(tuple(parts), self.label)


class HomogeneousYoungMeasure:
    """
    Base of the three representations. The measure is the same for every
    x in the domain: at(x) returns the measure itself.
    """

    variant: ClassVar[str] = ""
    support: SupportInterval

    def at(self, x: float) -> "HomogeneousYoungMeasure":
        return self


@dataclass(frozen=True, eq=False)
class AtomicMeasure(HomogeneousYoungMeasure):
    """sum_j w_j delta(y_j)"""

    variant: ClassVar[str] = "atomic"

    support: SupportInterval
    atoms: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        ordered = tuple(sorted((float(y), float(w)) for y, w in self.atoms))
        for y, w in ordered:
            if not w > 0:
                raise ValueError(f"Atom at {y} has non-positive weight {w}")
            if not self.support.contains(y):
                raise DomainError(f"Atom {y} lies outside K = {self.support.to_list()}")
        object.__setattr__(self, "atoms", ordered)

    @property
    def locations(self) -> np.ndarray:
        return np.array([y for y, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])


@dataclass(frozen=True, eq=False)
class AbsContMeasure(HomogeneousYoungMeasure):
    """g(y) dy; g may be +inf at the declared singular endpoints"""

    variant: ClassVar[str] = "abscont"

    support: SupportInterval
    density: Callable[[np.ndarray], np.ndarray]
    singular_endpoints: Tuple[float, ...] = ()
    label: str = ""


@dataclass(frozen=True, eq=False)
class StieltjesMeasure(HomogeneousYoungMeasure):
    """dF for a nondecreasing right-continuous F with F(c-) = 0"""

    variant: ClassVar[str] = "stieltjes"

    support: SupportInterval
    cdf: Callable[[np.ndarray], np.ndarray]
    cdf_left: Optional[Callable[[np.ndarray], np.ndarray]] = None
    breakpoints: Tuple[float, ...] = field(default=())
    label: str = ""


def density_measure(source: str, support: SupportInterval, singular_endpoints=(), label: str = "") -> AbsContMeasure:
    """Absolutely continuous measure from a density expression in y"""
    tree = parse_expression(source, "y")
    singular = tuple(sorted(float(s) for s in singular_endpoints))

    def density(ys):
        ys = np.asarray(ys, dtype=float)
        values = np.empty_like(ys)
        hit = np.isin(ys, singular)
        values[hit] = np.inf
        if np.any(~hit):
            values[~hit] = evaluate_expression(tree, ys[~hit])
        return values

    return AbsContMeasure(support, density, singular, label or format_expression(tree))


def _check_defined(beta: TestFunction, support: SupportInterval):
    """β must evaluate finitely on K (checked on a grid)"""
    beta(support.grid(257))


def integrate(nu: HomogeneousYoungMeasure, beta: TestFunction, tol: float = DEFAULT_TOL) -> float:
    """∫_K β dν"""
    if tol <= 0:
        raise ValueError("tol must be positive")
    c, d = nu.support
    match nu:
        case AtomicMeasure():
            _check_defined(beta, nu.support)
            return float(np.dot(nu.weights, np.atleast_1d(beta(nu.locations))))
        case AbsContMeasure():
            _check_defined(beta, nu.support)
            result = adaptive_quadrature(
                lambda ys: beta(ys) * nu.density(ys),
                (c, d),
                tol,
                singular_endpoints=nu.singular_endpoints,
            )
            return result.value
        case StieltjesMeasure():
            # ∫ β dF = β(d) F(d) - ∫ F β' dy, using F(c-) = 0
            _check_defined(beta, nu.support)
            top = float(beta(d)) * float(nu.cdf(np.array([d]))[0])
            result = adaptive_quadrature(
                lambda ys: nu.cdf(ys) * beta.prime(ys),
                (c, d),
                tol,
                breakpoints=nu.breakpoints,
            )
            return top - result.value
    raise TypeError(f"Unknown measure representation {type(nu).__name__}")


def total_mass(nu: HomogeneousYoungMeasure, tol: float = DEFAULT_TOL) -> float:
    return integrate(nu, ONE, tol)


def _check_set(nu: HomogeneousYoungMeasure, test_set: BorelTestSet):
    if not test_set.within(nu.support):
        raise DomainError(f"Test set {test_set.label} is not within K = {nu.support.to_list()}")


def measure_of_sets(nu: HomogeneousYoungMeasure, sets: Sequence[BorelTestSet], tol: float = DEFAULT_TOL) -> List[float]:
    """ν(A) for every A; atoms on an interval end count as inside"""
    for test_set in sets:
        _check_set(nu, test_set)
    match nu:
        case AtomicMeasure():
            locations, weights = nu.locations, nu.weights
            return [
                float(
                    sum(
                        weights[(locations >= lo) & (locations <= hi)].sum()
                        for lo, hi in test_set.intervals
                    )
                )
                for test_set in sets
            ]
        case AbsContMeasure():
            ends = sorted({v for s in sets for interval in s.intervals for v in interval})
            if not ends:
                return [0.0 for _ in sets]
            totals = cumulative_quadrature(nu.density, ends, tol, nu.singular_endpoints)
            table = dict(zip(ends, totals))
            return [
                float(sum(table[hi] - table[lo] for lo, hi in s.intervals)) for s in sets
            ]
        case StieltjesMeasure():
            left = nu.cdf_left or nu.cdf
            values = []
            for test_set in sets:
                if not test_set.intervals:
                    values.append(0.0)
                    continue
                los = np.array([lo for lo, _ in test_set.intervals])
                his = np.array([hi for _, hi in test_set.intervals])
                values.append(float(np.sum(nu.cdf(his) - left(los))))
            return values
    raise TypeError(f"Unknown measure representation {type(nu).__name__}")


def measure_of_set(nu: HomogeneousYoungMeasure, test_set: BorelTestSet, tol: float = DEFAULT_TOL) -> float:
    return measure_of_sets(nu, [test_set], tol)[0]


def cdf_grid(nu: HomogeneousYoungMeasure, ys, tol: float = DEFAULT_TOL) -> np.ndarray:
    """ν([c, y]) for every y (vectorized)"""
    ys = np.asarray(ys, dtype=float)
    match nu:
        case AtomicMeasure():
            cumulative = np.concatenate([[0.0], np.cumsum(nu.weights)])
            return cumulative[np.searchsorted(nu.locations, ys, side="right")]
        case AbsContMeasure():
            order = np.argsort(ys, kind="stable")
            grid = np.concatenate([[nu.support.lower], np.maximum(ys[order], nu.support.lower)])
            totals = cumulative_quadrature(nu.density, grid, tol, nu.singular_endpoints)[1:]
            result = np.empty_like(ys)
            result[order] = totals
            return result
        case StieltjesMeasure():
            return np.asarray(nu.cdf(ys), dtype=float)
    raise TypeError(f"Unknown measure representation {type(nu).__name__}")


def cdf_left_grid(nu: HomogeneousYoungMeasure, ys, tol: float = DEFAULT_TOL) -> np.ndarray:
    """ν([c, y)) for every y"""
    ys = np.asarray(ys, dtype=float)
    match nu:
        case AtomicMeasure():
            cumulative = np.concatenate([[0.0], np.cumsum(nu.weights)])
            return cumulative[np.searchsorted(nu.locations, ys, side="left")]
        case StieltjesMeasure(cdf_left=left) if left is not None:
            return np.asarray(left(ys), dtype=float)
    return cdf_grid(nu, ys, tol)


def cdf(nu: HomogeneousYoungMeasure, y: float, tol: float = DEFAULT_TOL) -> float:
    if not nu.support.contains(y):
        raise DomainError(f"y={y!r} lies outside K = {nu.support.to_list()}")
    return float(cdf_grid(nu, np.array([y]), tol)[0])


def measure_problems(nu: HomogeneousYoungMeasure, tol: float = MASS_TOL) -> List[str]:
    """Named invariant violations (empty for a valid probability measure)"""
    problems = []
    mass = total_mass(nu, tol / 10)
    if abs(mass - 1.0) > tol:
        problems.append(f"normalization: total mass {mass!r} differs from 1 by more than {tol:g}")
    match nu:
        case AtomicMeasure():
            if abs(nu.weights.sum() - 1.0) > ATOM_MASS_TOL:
                problems.append(f"normalization: atom weights sum to {nu.weights.sum()!r}")
        case AbsContMeasure():
            grid = nu.support.grid(257)
            values = nu.density(grid)
            if np.any(values[np.isfinite(values)] < 0):
                problems.append("density: negative values on K")
        case StieltjesMeasure():
            grid = nu.support.grid(REPORT_GRID)
            values = cdf_grid(nu, grid)
            start = cdf_left_grid(nu, grid[:1])[0]
            if abs(start) > ATOM_MASS_TOL or abs(values[-1] - 1.0) > ATOM_MASS_TOL:
                problems.append(f"cdf: F(c-)={start!r}, F(d)={values[-1]!r}")
            if np.any(np.diff(values) < -ATOM_MASS_TOL):
                problems.append("cdf: not nondecreasing on the verification grid")
    for problem in problems:
        logger.warning(f"{nu.variant} measure: {problem}")
    return problems


def measure_report(nu: HomogeneousYoungMeasure, grid: int = REPORT_GRID, tol: float = DEFAULT_TOL) -> dict:
    """Serializable description of a measure"""
    ys = nu.support.grid(grid)
    report = {
        "variant": nu.variant,
        "support": nu.support.to_list(),
        "total_mass": total_mass(nu, tol),
        "grid": ys,
        "cdf": cdf_grid(nu, ys, tol),
    }
    match nu:
        case AtomicMeasure():
            report["atoms"] = [{"at": y, "weight": w} for y, w in nu.atoms]
        case AbsContMeasure():
            report["density"] = nu.density(ys)
            report["singular_endpoints"] = list(nu.singular_endpoints)
        case StieltjesMeasure():
            report["breakpoints"] = list(nu.breakpoints)
    return report
