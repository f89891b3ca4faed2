"""
Data classes for the Young measure toolkit

This module contains the dataclasses used as return types and reports
throughout the application, plus the run configuration defaults.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

CONSISTENT = "consistent-with-convergence"
INCONSISTENT = "inconsistent"
INCONCLUSIVE = "inconclusive"
NOT_APPLICABLE = "not-applicable"


@dataclass
class RunConfig:
    """Defaults shared by the library entry points and the CLI flags"""

    identity_tol: float = 1e-7
    convergence_tol: float = 1e-6
    cdf_tol: float = 1e-9
    grid: int = 1025
    samples: int = 1_000_000
    seed: int = 42
    depth: int = 4
    levels: int = 6
    window: int = 3
    ks_threshold: float = 0.005
    output_dir: str = "ym-out"


@dataclass
class CheckResult:
    """One entry of a validation report"""

    name: str
    passed: bool
    category: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "category": self.category,
            "detail": self.detail,
        }


@dataclass
class ValidationReport:
    """Result of validating a partitioned function; failures are entries, not exceptions"""

    checks: List[CheckResult] = field(default_factory=list)

    def add(self, name: str, passed: bool, category: str, detail: str = ""):
        self.checks.append(CheckResult(name, bool(passed), category, detail))

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def structurally_valid(self) -> bool:
        """Everything except the onto condition"""
        return all(check.passed for check in self.checks if check.category != "onto")

    @property
    def onto(self) -> bool:
        return all(check.passed for check in self.checks if check.category == "onto")

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    subdivisions: int


@dataclass(frozen=True)
class EmpiricalSample:
    """Sorted Monte-Carlo sample of the image measure"""

    values: np.ndarray
    seed: int
    n: int


@dataclass
class IdentityEntry:
    label: str
    lhs: Optional[float]
    rhs: Optional[float]
    difference: Optional[float]
    tolerance: float
    passed: bool
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "beta": self.label,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "difference": self.difference,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "error": self.error,
        }


@dataclass
class IdentityReport:
    """Per-β comparison of ∫β dν against (1/M)∫β(u(x))dx"""

    variant: str
    entries: List[IdentityEntry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    @property
    def failures(self) -> List[IdentityEntry]:
        return [entry for entry in self.entries if not entry.passed]

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "passed": self.passed,
            "entries": [entry.to_dict() for entry in self.entries],
        }


@dataclass
class CrossReport:
    """Pairwise agreement between measure representations of one function"""

    representations: List[str]
    cdf_discrepancies: dict
    integral_discrepancies: dict
    tolerance: float
    grid: int
    note: str = ""

    @property
    def passed(self) -> bool:
        values = list(self.cdf_discrepancies.values())
        return all(value <= self.tolerance for value in values)

    def to_dict(self) -> dict:
        return {
            "representations": self.representations,
            "cdf_discrepancies": self.cdf_discrepancies,
            "integral_discrepancies": self.integral_discrepancies,
            "tolerance": self.tolerance,
            "grid": self.grid,
            "passed": self.passed,
            "note": self.note,
        }


@dataclass
class KSReport:
    variant: str
    distance: float
    threshold: float
    n: int
    seed: int
    p_value: float

    @property
    def passed(self) -> bool:
        return self.distance < self.threshold

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "distance": self.distance,
            "threshold": self.threshold,
            "n": self.n,
            "seed": self.seed,
            "p_value": self.p_value,
            "passed": self.passed,
        }


@dataclass
class SetProbe:
    """Value sequence of one test set across the measure sequence"""

    label: str
    values: List[Optional[float]]
    residual: Optional[float]
    limit: Optional[float]
    status: str = "ok"

    def to_dict(self) -> dict:
        return {
            "set": self.label,
            "values": self.values,
            "residual": self.residual,
            "limit": self.limit,
            "status": self.status,
        }


@dataclass
class UniformIntegrability:
    """Largest mass carried by an interval of length δ, maximized over the sequence"""

    deltas: List[float]
    omegas: List[float]
    fired: bool
    first_mass: float = 0.0
    tail_mass: float = 0.0

    def to_dict(self) -> dict:
        return {
            "deltas": self.deltas,
            "omegas": self.omegas,
            "fired": self.fired,
            "first_mass": self.first_mass,
            "tail_mass": self.tail_mass,
        }


@dataclass
class ConvergenceReport:
    kind: str
    indices: List[int]
    probes: List[SetProbe]
    tolerance: float
    window: int
    verdict: str
    uniform_integrability: Optional[UniformIntegrability] = None

    @property
    def labels(self) -> List[str]:
        return [probe.label for probe in self.probes]

    @property
    def limits(self) -> dict:
        return {probe.label: probe.limit for probe in self.probes}

    def matrix_rows(self):
        """Rows = sets, columns = sequence index"""
        for probe in self.probes:
            yield [probe.label, *probe.values]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "indices": self.indices,
            "tolerance": self.tolerance,
            "window": self.window,
            "verdict": self.verdict,
            "uniform_integrability": (
                self.uniform_integrability.to_dict()
                if self.uniform_integrability
                else None
            ),
            "sets": [probe.to_dict() for probe in self.probes],
        }


@dataclass
class EquivalenceReport:
    status: str
    verdicts: dict
    limit_differences: dict
    tolerance: float
    annotations: List[str] = field(default_factory=list)

    @property
    def max_limit_difference(self) -> Optional[float]:
        values = [v for v in self.limit_differences.values() if v is not None]
        return max(values) if values else None

    @property
    def passed(self) -> bool:
        return self.status != "contradiction"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "passed": self.passed,
            "verdicts": self.verdicts,
            "tolerance": self.tolerance,
            "max_limit_difference": self.max_limit_difference,
            "limit_differences": self.limit_differences,
            "annotations": self.annotations,
        }


@dataclass
class ScenarioReport:
    monotone: bool
    bounded: bool
    converged: bool
    witnesses: List[dict]
    tolerance: float
    probe: Optional[ConvergenceReport] = None

    @property
    def passed(self) -> bool:
        return self.monotone and self.bounded and self.converged

    @property
    def witness(self) -> Optional[str]:
        return self.witnesses[0]["set"] if self.witnesses else None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "monotone": self.monotone,
            "bounded": self.bounded,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "witness": self.witness,
            "witnesses": self.witnesses,
            "probe": self.probe.to_dict() if self.probe else None,
        }


@dataclass
class CompositionReport:
    """∫f(u^l)w dx per oscillation level against (∫w dx)·∫f dν"""

    f: str
    w: str
    levels: List[int]
    values: List[float]
    limit: float
    deviations: List[float]

    def to_dict(self) -> dict:
        return {
            "f": self.f,
            "w": self.w,
            "levels": self.levels,
            "values": self.values,
            "limit": self.limit,
            "deviations": self.deviations,
        }
