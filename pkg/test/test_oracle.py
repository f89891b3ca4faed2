from pathlib import Path

import numpy as np
import pytest

from src.construct import build_measures
from src.convergence import generate_test_sets
from src.data import EmpiricalSample
from src.errors import ValidationError
from src.measures import AtomicMeasure, BorelTestSet, SupportInterval, measure_of_set, measure_of_sets
from src.oracle import (
    ks_distance,
    ks_report,
    monte_carlo_pushforward,
    preimage_measure,
    write_sample_csv,
)
from src.specs import load_spec

FIXTURES = Path(__file__).parent.parent / "fixtures"


def load(name):
    return load_spec(FIXTURES / name)


def test_sampling_is_deterministic():
    u = load("xsq.json").function
    first = monte_carlo_pushforward(u, 10_000, seed=42)
    second = monte_carlo_pushforward(u, 10_000, seed=42)
    other = monte_carlo_pushforward(u, 10_000, seed=43)
    assert np.array_equal(first.values, second.values)
    assert not np.array_equal(first.values, other.values)
    assert np.all(np.diff(first.values) >= 0)


def test_sharded_sampling_is_deterministic():
    u = load("sawtooth.json").function
    first = monte_carlo_pushforward(u, 10_001, seed=5, shards=4)
    second = monte_carlo_pushforward(u, 10_001, seed=5, shards=4)
    assert first.values.size == 10_001
    assert np.array_equal(first.values, second.values)


def test_sampling_rejects_invalid_function():
    with pytest.raises(ValidationError):
        monte_carlo_pushforward(load("bad.json").function, 100)


@pytest.mark.parametrize(
    "name", ["identity.json", "xsq.json", "sawtooth.json", "oscillation3.yaml", "step.json"]
)
def test_ks_against_every_representation(name):
    spec = load(name)
    sample = monte_carlo_pushforward(spec.function, 1_000_000, seed=42)
    for nu in build_measures(spec.function, spec.K).values():
        report = ks_report(sample, nu)
        assert report.passed, (nu.variant, report.distance)
        assert 0.0 <= report.p_value <= 1.0


def test_ks_detects_wrong_measure():
    spec = load("xsq.json")
    sample = monte_carlo_pushforward(spec.function, 100_000, seed=1)
    wrong = build_measures(load("identity.json").function)["density"]
    assert ks_distance(sample, wrong) > 0.2


def test_ks_handles_ties_on_atoms():
    nu = AtomicMeasure(SupportInterval(0.0, 3.0), ((1.0, 0.5), (2.0, 0.5)))
    sample = EmpiricalSample(values=np.array([1.0, 1.0, 2.0, 2.0]), seed=0, n=4)
    assert ks_distance(sample, nu) == 0.0


def test_preimage_measure_matches_constructed_measure():
    spec = load("sawtooth.json")
    test_set = BorelTestSet(((0.1, 0.3), (0.6, 0.65)))
    measures = build_measures(spec.function, spec.K)
    expected = preimage_measure(spec.function, test_set)
    assert expected == pytest.approx(0.25, abs=1e-12)
    for nu in measures.values():
        assert measure_of_set(nu, test_set) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize(
    "name", ["identity.json", "xsq.json", "sawtooth.json", "oscillation3.yaml", "step.json"]
)
def test_every_representation_matches_preimage_on_dyadic_sets(name):
    spec = load(name)
    for variant, nu in build_measures(spec.function, spec.K).items():
        family = generate_test_sets(nu.support, 4)
        expected = [preimage_measure(spec.function, test_set) for test_set in family]
        actual = measure_of_sets(nu, list(family))
        assert np.allclose(actual, expected, rtol=0, atol=1e-9), variant


def test_preimage_measure_of_step():
    spec = load("step.json")
    assert preimage_measure(spec.function, BorelTestSet(((1.5, 3.0),))) == pytest.approx(0.7)


def test_write_sample_csv(tmp_path):
    sample = EmpiricalSample(values=np.array([0.25, 0.5]), seed=1, n=2)
    path = write_sample_csv(sample, tmp_path / "sample.csv")
    assert path.read_text().splitlines() == ["value", "0.25", "0.5"]
