"""
Weak-convergence diagnostics for sequences of homogeneous Young measures

Values ∫_A g^l dy (density side) and ν^l(A) (measure side) are tabulated over a
finite family of test sets; a sequence is consistent with convergence when
every per-set value sequence is Cauchy within tol over the last `window`
indices. Set-wise convergence on intervals does not imply weak L1 convergence
of the densities, so the density probe also runs a uniform-integrability
diagnostic.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .construct import (
    density_young_measure,
    pushforward_young_measure,
    stieltjes_from_monotone,
    support_of,
)
from .data import (
    CONSISTENT,
    INCONCLUSIVE,
    INCONSISTENT,
    NOT_APPLICABLE,
    CompositionReport,
    ConvergenceReport,
    EquivalenceReport,
    ScenarioReport,
    SetProbe,
    UniformIntegrability,
)
from .errors import (
    ConstructionError,
    FamilyMismatchError,
    QuadratureError,
    SequenceError,
    ValidationError,
)
from .exprfn import (
    Binary,
    Const,
    ExpressionAst,
    PartitionedFunction,
    Piece,
    Var,
    evaluate_expression,
    parse_expression,
    substitute,
    validate,
)
from .measures import (
    MASS_TOL,
    AbsContMeasure,
    BorelTestSet,
    HomogeneousYoungMeasure,
    StieltjesMeasure,
    SupportInterval,
    TestFunction,
    density_measure,
    integrate,
    measure_of_sets,
    total_mass,
)
from .quadrature import DEFAULT_TOL, adaptive_quadrature, cumulative_quadrature
from .utils import logger

DEFAULT_TOL_CONVERGENCE = 1e-6
DEFAULT_WINDOW = 3
DEFAULT_DEPTH = 4

# two-interval unions, as fractions of K
UNION_TEMPLATES = (
    ((0.0, 0.125), (0.875, 1.0)),
    ((0.0, 0.25), (0.5, 0.75)),
    ((0.25, 0.5), (0.75, 1.0)),
    ((0.0, 0.0625), (0.9375, 1.0)),
    ((0.125, 0.375), (0.625, 0.875)),
    ((0.0625, 0.125), (0.5, 0.5625)),
    ((0.375, 0.4375), (0.8125, 0.9375)),
    ((0.0, 0.5), (0.75, 0.875)),
)

UI_DELTAS = tuple(2.0 ** -k for k in range(4, 11))
UI_THRESHOLD = 0.05
UI_GROWTH = 2.0
UI_QUAD_TOL = 1e-8
UI_MIN_CELLS = 64

__all__ = [
    "BorelTestSet",
    "TestSetFamily",
    "MeasureSequence",
    "generate_test_sets",
    "weak_l1_probe",
    "weak_measure_probe",
    "equivalence_check",
    "oscillating_sequence",
    "oscillation_levels",
    "monotone_density_scenario",
    "composition_limit_probe",
    "perturbation_sequence",
    "concentration_sequence",
]


@dataclass(frozen=True)
class TestSetFamily:
    """Finite surrogate for the Borel sets of K"""

    __test__ = False

    support: SupportInterval
    sets: Tuple[BorelTestSet, ...]
    depth: int = 0

    def __post_init__(self):
        if not self.sets:
            raise ValueError("Test-set family is empty")
        whole = ((self.support.lower, self.support.upper),)
        if not any(s.intervals == whole for s in self.sets):
            raise ValueError("Test-set family must contain K itself")
        labels = [s.label for s in self.sets]
        if len(set(labels)) != len(labels):
            raise ValueError("Test-set labels must be unique")

    @property
    def labels(self) -> List[str]:
        return [s.label for s in self.sets]

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)


def generate_test_sets(K: SupportInterval, depth: int = DEFAULT_DEPTH) -> TestSetFamily:
    """Dyadic subintervals of K at depths 0..depth (K first), then the fixed unions"""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    c, width = K.lower, K.width

    def at(fraction: float) -> float:
        return K.upper if fraction == 1.0 else c + fraction * width

    candidates = []
    for level in range(depth + 1):
        parts = 2 ** level
        for k in range(parts):
            candidates.append(((at(k / parts), at((k + 1) / parts)),))
    candidates += [tuple((at(lo), at(hi)) for lo, hi in template) for template in UNION_TEMPLATES]

    # dyadic ends that collapse in floating point give repeated or touching intervals
    sets, seen = [], set()
    for intervals in candidates:
        try:
            test_set = BorelTestSet(intervals)
        except ValueError:
            logger.debug(f"Skipped degenerate test set {intervals}")
            continue
        if test_set.intervals not in seen:
            seen.add(test_set.intervals)
            sets.append(test_set)
    logger.debug(f"Generated {len(sets)} test sets over {K.to_list()} to depth {depth}")
    return TestSetFamily(K, tuple(sets), depth)


@dataclass(frozen=True, eq=False)
class MeasureSequence:
    """ν^1 ... ν^L with their sequence indices and, when known, the functions they came from"""

    measures: Tuple[HomogeneousYoungMeasure, ...]
    indices: Tuple[int, ...] = ()
    sources: Tuple[PartitionedFunction, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "measures", tuple(self.measures))
        if len(self.measures) < 2:
            raise SequenceError(f"A sequence needs at least 2 elements, got {len(self.measures)}")
        indices = tuple(self.indices) or tuple(range(1, len(self.measures) + 1))
        if len(indices) != len(self.measures):
            raise SequenceError("indices and measures differ in length")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "sources", tuple(self.sources))

    def __len__(self):
        return len(self.measures)

    @property
    def support(self) -> SupportInterval:
        hull = self.measures[0].support
        for nu in self.measures[1:]:
            hull = hull.hull(nu.support)
        return hull

    def check_masses(self, tol: float = MASS_TOL):
        for index, nu in zip(self.indices, self.measures):
            mass = total_mass(nu, tol / 10)
            if abs(mass - 1.0) > tol:
                raise SequenceError(f"Element {index} has total mass {mass!r}, not 1 within {tol:g}")
        return self

    @classmethod
    def densities_of(cls, us: Sequence[PartitionedFunction], indices=(), K: Optional[SupportInterval] = None):
        """Inverse-Jacobian densities, each on its own support unless K is given"""
        measures = [density_young_measure(u, K or support_of(u)) for u in us]
        return cls(tuple(measures), tuple(indices), tuple(us), {"representation": "density"}).check_masses()

    @classmethod
    def pushforwards_of(cls, us: Sequence[PartitionedFunction], indices=(), K: Optional[SupportInterval] = None):
        measures = [pushforward_young_measure(u, K or support_of(u)) for u in us]
        return cls(tuple(measures), tuple(indices), tuple(us), {"representation": "pushforward"}).check_masses()

    @classmethod
    def monotone_of(cls, us: Sequence[PartitionedFunction], indices=()):
        measures = [stieltjes_from_monotone(u) for u in us]
        return cls(tuple(measures), tuple(indices), tuple(us), {"representation": "stieltjes"}).check_masses()


def _check_window(sequence: MeasureSequence, window: int):
    if window < 2:
        raise SequenceError("window must be at least 2")
    if window > len(sequence):
        raise SequenceError(f"window {window} exceeds sequence length {len(sequence)}")


def _set_values(nu: HomogeneousYoungMeasure, family: TestSetFamily, tol: float) -> List[Optional[float]]:
    """ν(A ∩ K_ν) for every A; None where quadrature fails"""
    clipped = [s.clip(nu.support) for s in family]
    try:
        return measure_of_sets(nu, clipped, tol)
    except QuadratureError as e:
        logger.warning(f"Batched set evaluation failed ({e}); retrying set by set")
    values = []
    for test_set in clipped:
        try:
            values.append(measure_of_sets(nu, [test_set], tol)[0])
        except QuadratureError as e:
            logger.warning(f"Set {test_set.label} marked inconclusive: {e}")
            values.append(None)
    return values


def _probes(matrix: List[List[Optional[float]]], family: TestSetFamily, window: int) -> List[SetProbe]:
    probes = []
    for test_set, values in zip(family, matrix):
        if any(v is None for v in values):
            known = [v for v in values if v is not None]
            probes.append(SetProbe(test_set.label, values, None, known[-1] if known else None, INCONCLUSIVE))
            continue
        tail = values[-window:]
        probes.append(SetProbe(test_set.label, values, float(max(tail) - min(tail)), values[-1]))
    return probes


def _verdict(probes: List[SetProbe], tol: float) -> str:
    if any(probe.residual is not None and probe.residual > tol for probe in probes):
        return INCONSISTENT
    if any(probe.status == INCONCLUSIVE for probe in probes):
        return INCONCLUSIVE
    return CONSISTENT


def _window_masses(nu: AbsContMeasure, deltas: Sequence[float], step: float) -> List[float]:
    """max over intervals of length <= δ of ∫ g, on a grid of the given step"""
    c, d = nu.support
    cells = max(UI_MIN_CELLS, int(np.ceil((d - c) / step)))
    grid = np.linspace(c, d, cells + 1)
    totals = cumulative_quadrature(nu.density, grid, UI_QUAD_TOL, nu.singular_endpoints)
    actual = (d - c) / cells
    masses = []
    for delta in deltas:
        k = min(cells, max(1, int(np.floor(delta / actual + 1e-9))))
        masses.append(float(np.max(totals[k:] - totals[:-k])))
    return masses


def uniform_integrability(gs: MeasureSequence, window: int = DEFAULT_WINDOW) -> UniformIntegrability:
    """
    ω(δ) = max_l sup_{|A| <= δ} ∫_A g^l, δ taken as fractions of |K|.

    Fires only when the mass on the smallest windows builds up along the
    sequence: every one of the last `window` elements carries more than
    UI_THRESHOLD there, and at least UI_GROWTH times what the first element
    carries. A fixed singular density repeated is uniformly integrable and
    leaves the diagnostic clean.
    """
    width = gs.support.width
    deltas = [delta * width for delta in UI_DELTAS]
    step = deltas[-1] / 4
    per_element = np.array([_window_masses(nu, deltas, step) for nu in gs.measures])
    omegas = per_element.max(axis=0)
    first = float(per_element[0, -1])
    tail = float(per_element[-window:, -1].min())
    fired = bool(tail > UI_THRESHOLD and tail >= UI_GROWTH * first)
    if fired:
        logger.warning(
            f"Uniform-integrability diagnostic fired: mass on windows of length {deltas[-1]:.3g} "
            f"grew from {first:.3g} to at least {tail:.3g} over the last {window} elements"
        )
    return UniformIntegrability(deltas, omegas.tolist(), fired, first, tail)


def weak_l1_probe(
    gs: MeasureSequence,
    family: TestSetFamily,
    tol: float = DEFAULT_TOL_CONVERGENCE,
    window: int = DEFAULT_WINDOW,
    quad_tol: float = DEFAULT_TOL,
) -> ConvergenceReport:
    """∫_A g^l dy over the family, with tail residuals and the uniform-integrability diagnostic"""
    _check_window(gs, window)
    for nu in gs.measures:
        if not isinstance(nu, AbsContMeasure):
            raise SequenceError(f"Density probe needs absolutely continuous measures, got {nu.variant}")
    matrix = list(map(list, zip(*(_set_values(nu, family, quad_tol) for nu in gs.measures))))
    probes = _probes(matrix, family, window)
    try:
        diagnostic = uniform_integrability(gs, window)
    except QuadratureError as e:
        logger.warning(f"Uniform-integrability diagnostic could not be evaluated: {e}")
        diagnostic = None
    verdict = _verdict(probes, tol)
    if verdict == CONSISTENT and (diagnostic is None or diagnostic.fired):
        verdict = INCONCLUSIVE
    logger.info(f"Density probe over {len(family)} sets and {len(gs)} elements: {verdict}")
    return ConvergenceReport("density", list(gs.indices), probes, tol, window, verdict, diagnostic)


def weak_measure_probe(
    nus: MeasureSequence,
    family: TestSetFamily,
    tol: float = DEFAULT_TOL_CONVERGENCE,
    window: int = DEFAULT_WINDOW,
    quad_tol: float = DEFAULT_TOL,
) -> ConvergenceReport:
    """ν^l(A) over the family, with tail residuals"""
    _check_window(nus, window)
    matrix = list(map(list, zip(*(_set_values(nu, family, quad_tol) for nu in nus.measures))))
    probes = _probes(matrix, family, window)
    verdict = _verdict(probes, tol)
    logger.info(f"Measure probe over {len(family)} sets and {len(nus)} elements: {verdict}")
    return ConvergenceReport("measure", list(nus.indices), probes, tol, window, verdict)


def equivalence_check(
    density_report: Optional[ConvergenceReport],
    measure_report: ConvergenceReport,
    tol: float = DEFAULT_TOL_CONVERGENCE,
) -> EquivalenceReport:
    """
    Density-side and measure-side verdicts and limits must agree. Without a
    density report (piecewise-constant functions have no density) only the
    measure side is reported, annotated.
    """
    if density_report is None:
        annotation = "no density side: piecewise-constant functions generate atomic measures only"
        logger.warning(annotation)
        verdicts = {"density": NOT_APPLICABLE, "measure": measure_report.verdict}
        return EquivalenceReport("annotated", verdicts, {}, tol, [annotation])
    if density_report.labels != measure_report.labels:
        raise FamilyMismatchError("Reports were computed over different test-set families")
    if density_report.indices != measure_report.indices:
        raise FamilyMismatchError("Reports were computed over different sequences")

    differences = {}
    for label, first, second in zip(
        density_report.labels, density_report.limits.values(), measure_report.limits.values()
    ):
        differences[label] = None if first is None or second is None else abs(first - second)
    limits_agree = all(v is not None and v <= tol for v in differences.values())

    verdicts = {"density": density_report.verdict, "measure": measure_report.verdict}
    annotations = []
    diagnostic = density_report.uniform_integrability
    if diagnostic is not None and diagnostic.fired:
        annotations.append(
            "uniform-integrability diagnostic fired on the densities: set-wise convergence on "
            "intervals does not establish weak L1 convergence, so the density-side hypothesis "
            "of the equivalence is not met"
        )
    elif diagnostic is None:
        annotations.append("uniform-integrability diagnostic unavailable")
    if INCONCLUSIVE in verdicts.values() and not annotations:
        annotations.append("a probe was inconclusive on some test set")

    if verdicts["density"] == verdicts["measure"] and limits_agree:
        status = "equivalent"
    elif annotations:
        status = "annotated"
    else:
        status = "contradiction"
    for annotation in annotations:
        logger.warning(annotation)
    logger.info(f"Equivalence check: {status} (verdicts {verdicts})")
    return EquivalenceReport(status, verdicts, differences, tol, annotations)


def oscillating_sequence(base: PartitionedFunction, l: int) -> PartitionedFunction:
    """Ω split into l congruent blocks with base compressed affinely into each"""
    if l < 1:
        raise ValueError("l must be at least 1")
    report = validate(base)
    if not report.structurally_valid:
        raise ValidationError(report)
    if l == 1:
        return base
    a, b = base.domain
    measure = base.measure
    pieces = []
    for k in range(l):
        block_left = a + measure * k / l
        block_right = b if k == l - 1 else a + measure * (k + 1) / l
        scale = (block_right - block_left) / measure
        # x in the block -> a + l (x - block_left)
        local = Binary("+", Const(a), Binary("*", Const(float(l)), Binary("-", Var("x"), Const(block_left))))
        for piece in base.pieces:
            left = block_left + (piece.left - a) * scale
            right = block_right if piece.right == b else block_left + (piece.right - a) * scale
            pieces.append(Piece.build(left, right, substitute(piece.expr, local)))
    logger.debug(f"Oscillated {len(base.pieces)} piece(s) into {len(pieces)} at level {l}")
    return PartitionedFunction.from_pieces(base.domain, pieces, base.kind)


def oscillation_levels(count: int) -> List[int]:
    """1, 2, 4, ..., 2^(count-1)"""
    if count < 1:
        raise ValueError("count must be at least 1")
    return [2 ** k for k in range(count)]


def perturbation_sequence(count: int = 8) -> Tuple[List[PartitionedFunction], List[int]]:
    """u_l(x) = x + x^2/l on (0, 1) for l = 10^2 ... 10^(count+1)"""
    indices = [10 ** (k + 1) for k in range(1, count + 1)]
    functions = [
        PartitionedFunction.from_pieces((0.0, 1.0), [((0.0, 1.0), f"x + x^2/{l}")]) for l in indices
    ]
    return functions, indices


def concentration_sequence(count: int = 8) -> MeasureSequence:
    """g^l(y) = l y^(l-1) on [0, 1] for l = 4 ... 4^count"""
    indices = [4 ** k for k in range(1, count + 1)]
    K = SupportInterval(0.0, 1.0)
    measures = [density_measure(f"{l}*y^{l - 1}", K, label=f"l={l}") for l in indices]
    return MeasureSequence(tuple(measures), tuple(indices), metadata={"representation": "density"}).check_masses()


def monotone_density_scenario(
    us: MeasureSequence,
    family: TestSetFamily,
    tol: float = DEFAULT_TOL_CONVERGENCE,
    window: int = DEFAULT_WINDOW,
) -> ScenarioReport:
    """Set integrals of the inverse derivatives must be nondecreasing in n, bounded by 1 and convergent"""
    if len(us.sources) != len(us):
        raise SequenceError("Monotone scenario needs the functions behind the measures")
    for u in us.sources:
        if len(u.pieces) != 1 or u.pieces[0].direction != 1:
            raise ConstructionError("Every element must be a single strictly increasing piece")
    for nu in us.measures:
        if not isinstance(nu, StieltjesMeasure):
            raise SequenceError(f"Monotone scenario needs Stieltjes measures, got {nu.variant}")

    window = min(window, len(us))
    matrix = list(map(list, zip(*(_set_values(nu, family, DEFAULT_TOL) for nu in us.measures))))
    witnesses = []
    bounded = True
    for test_set, values in zip(family, matrix):
        if any(v is None for v in values):
            continue
        for (n, before), (m, after) in zip(
            zip(us.indices, values), zip(us.indices[1:], values[1:])
        ):
            if after < before - tol:
                witnesses.append(
                    {"set": test_set.label, "from_index": n, "to_index": m, "before": before, "after": after}
                )
        if max(values) > 1.0 + tol:
            bounded = False

    densities = MeasureSequence(
        tuple(density_young_measure(u, nu.support) for u, nu in zip(us.sources, us.measures)),
        us.indices,
        us.sources,
    ).check_masses()
    probe = weak_l1_probe(densities, family, tol, window)
    converged = all(p.residual is not None and p.residual <= tol for p in probe.probes)
    for witness in witnesses[:5]:
        logger.warning(
            f"Monotonicity fails on {witness['set']}: {witness['before']:.6g} -> "
            f"{witness['after']:.6g} (indices {witness['from_index']} -> {witness['to_index']})"
        )
    report = ScenarioReport(not witnesses, bounded, converged, witnesses, tol, probe)
    logger.info(f"Monotone scenario: {'pass' if report.passed else 'FAIL'}")
    return report


def composition_limit_probe(
    base: PartitionedFunction,
    levels: Sequence[int],
    f: TestFunction,
    w="1",
    tol: float = 1e-9,
    K: Optional[SupportInterval] = None,
) -> CompositionReport:
    """∫_Ω f(u^l(x)) w(x) dx per level against (∫_Ω w dx) ∫_K f dν"""
    weight: ExpressionAst = parse_expression(w, "x") if isinstance(w, str) else w
    nu = pushforward_young_measure(base, K or support_of(base))
    a, b = base.domain
    weight_mass = adaptive_quadrature(lambda xs: evaluate_expression(weight, xs), (a, b), tol).value
    limit = weight_mass * integrate(nu, f, tol)

    values = []
    for level in levels:
        u = oscillating_sequence(base, level)
        share = tol / len(u.pieces)
        total = 0.0
        for piece in u.pieces:
            total += adaptive_quadrature(
                lambda xs, piece=piece: f(evaluate_expression(piece.expr, xs)) * evaluate_expression(weight, xs),
                (piece.left, piece.right),
                share,
            ).value
        values.append(total)
    deviations = [abs(v - limit) for v in values]
    logger.info(f"Composition limit {limit!r}; deviation at level {levels[-1]}: {deviations[-1]:.3g}")
    return CompositionReport(f.label, w if isinstance(w, str) else str(w), list(levels), values, limit, deviations)
