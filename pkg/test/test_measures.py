import numpy as np
import pytest

from src.errors import DomainError, EvaluationDomainError
from src.measures import (
    AbsContMeasure,
    AtomicMeasure,
    BorelTestSet,
    StieltjesMeasure,
    SupportInterval,
    TestFunction,
    cdf,
    cdf_grid,
    cdf_left_grid,
    default_test_functions,
    density_measure,
    integrate,
    measure_of_set,
    measure_of_sets,
    measure_problems,
    measure_report,
    total_mass,
)

UNIT = SupportInterval(0.0, 1.0)


def uniform():
    return AbsContMeasure(UNIT, lambda ys: np.ones_like(np.asarray(ys, dtype=float)))


def test_support_interval_rejects_degenerate():
    with pytest.raises(ValueError):
        SupportInterval(1.0, 1.0)


def test_borel_set_sorts_and_rejects_overlap():
    test_set = BorelTestSet(((0.5, 0.75), (0.0, 0.25)))
    assert test_set.intervals == ((0.0, 0.25), (0.5, 0.75))
    assert test_set.label == "[0,0.25] u [0.5,0.75]"
    assert test_set.length == 0.5
    with pytest.raises(ValueError):
        BorelTestSet(((0.0, 0.5), (0.5, 1.0)))


def test_borel_set_clip():
    clipped = BorelTestSet(((0.0, 0.5), (0.75, 1.5))).clip(UNIT)
    assert clipped.intervals == ((0.0, 0.5), (0.75, 1.0))
    assert BorelTestSet(((2.0, 3.0),), "far").clip(UNIT).intervals == ()


def test_atomic_measure():
    nu = AtomicMeasure(SupportInterval(0.0, 3.0), ((2.0, 0.7), (1.0, 0.3)))
    assert nu.locations.tolist() == [1.0, 2.0]
    assert integrate(nu, TestFunction.parse("y^2")) == pytest.approx(0.3 + 0.7 * 4)
    assert measure_of_set(nu, BorelTestSet(((0.0, 1.0),))) == pytest.approx(0.3)
    assert cdf(nu, 1.0) == pytest.approx(0.3)
    assert cdf_left_grid(nu, [1.0])[0] == 0.0
    assert nu.at(0.42) is nu
    with pytest.raises(DomainError):
        AtomicMeasure(UNIT, ((2.0, 1.0),))


def test_test_function_must_be_defined_on_support_for_every_variant():
    log = TestFunction.parse("log(y)")
    atomic = AtomicMeasure(UNIT, ((0.5, 1.0),))
    stieltjes = StieltjesMeasure(UNIT, cdf=lambda ys: np.clip(np.asarray(ys, dtype=float), 0.0, 1.0))
    for nu in [atomic, uniform(), stieltjes]:
        with pytest.raises(EvaluationDomainError):
            integrate(nu, log)


def test_uniform_density_integrals():
    nu = uniform()
    assert total_mass(nu) == pytest.approx(1.0, abs=1e-12)
    assert integrate(nu, TestFunction.parse("exp(y)")) == pytest.approx(np.e - 1, abs=1e-11)
    sets = [BorelTestSet(((0.0, 0.25),)), BorelTestSet(((0.0, 0.125), (0.5, 1.0)))]
    assert measure_of_sets(nu, sets) == pytest.approx([0.25, 0.625], abs=1e-12)
    assert np.allclose(cdf_grid(nu, [0.75, 0.25, 1.0]), [0.75, 0.25, 1.0], atol=1e-12)


def test_singular_density():
    nu = density_measure("1/(2*sqrt(y))", UNIT, singular_endpoints=(0.0,))
    assert total_mass(nu) == pytest.approx(1.0, abs=1e-9)
    assert measure_of_set(nu, BorelTestSet(((0.0, 0.25),))) == pytest.approx(0.5, abs=1e-9)
    assert integrate(nu, TestFunction.parse("y")) == pytest.approx(1 / 3, abs=1e-9)


def test_stieltjes_integration_by_parts():
    nu = StieltjesMeasure(UNIT, cdf=lambda ys: np.asarray(ys, dtype=float) ** 2)
    # dF = 2y dy
    assert integrate(nu, TestFunction.parse("y")) == pytest.approx(2 / 3, abs=1e-12)
    assert integrate(nu, TestFunction.parse("sin(y)")) == pytest.approx(
        2 * (np.sin(1) - np.cos(1)), abs=1e-12
    )
    assert measure_of_set(nu, BorelTestSet(((0.5, 1.0),))) == pytest.approx(0.75)


def test_stieltjes_with_jump():
    def step(ys):
        return np.where(np.asarray(ys) >= 0.5, 1.0, 0.0)

    def step_left(ys):
        return np.where(np.asarray(ys) > 0.5, 1.0, 0.0)

    nu = StieltjesMeasure(UNIT, cdf=step, cdf_left=step_left, breakpoints=(0.5,))
    assert integrate(nu, TestFunction.parse("exp(y)")) == pytest.approx(np.exp(0.5), abs=1e-12)
    assert measure_of_set(nu, BorelTestSet(((0.5, 0.5),))) == 1.0
    assert measure_problems(nu) == []


def test_measure_problems_names_normalization():
    problems = measure_problems(density_measure("2", UNIT))
    assert len(problems) == 1
    assert problems[0].startswith("normalization")


def test_set_outside_support_raises():
    with pytest.raises(DomainError):
        measure_of_set(uniform(), BorelTestSet(((0.5, 2.0),)))
    with pytest.raises(DomainError):
        cdf(uniform(), 1.5)


def test_default_test_functions():
    labels = [beta.label for beta in default_test_functions(["cos(y)"])]
    assert labels == ["1", "y", "y^2", "sin(y)", "exp(y)", "cos(y)"]


def test_measure_report_fields():
    report = measure_report(density_measure("2*y", UNIT), grid=5)
    assert report["variant"] == "abscont"
    assert report["support"] == [0.0, 1.0]
    assert np.allclose(report["cdf"], np.linspace(0, 1, 5) ** 2, atol=1e-12)
    assert np.allclose(report["density"], 2 * np.linspace(0, 1, 5))
