import numpy as np
import pytest
from scipy.integrate import quad

from src.errors import QuadratureError
from src.quadrature import adaptive_quadrature, cumulative_quadrature, integrate_cells


@pytest.mark.parametrize("degree", range(11))
def test_polynomials_are_exact(degree):
    result = adaptive_quadrature(lambda x: x**degree, (0.0, 1.0), 1e-13)
    assert abs(result.value - 1.0 / (degree + 1)) <= 1e-12


def test_integrable_endpoint_singularity():
    result = adaptive_quadrature(
        lambda y: 1.0 / (2.0 * np.sqrt(y)), (0.0, 1.0), 1e-11, singular_endpoints=(0.0,)
    )
    assert abs(result.value - 1.0) <= 1e-9
    assert result.subdivisions > 1


def test_log_singularity_against_scipy():
    reference, _ = quad(lambda y: -np.log(y), 0.0, 1.0)
    result = adaptive_quadrature(lambda y: -np.log(y), (0.0, 1.0), 1e-11, singular_endpoints=(0.0,))
    assert result.value == pytest.approx(reference, abs=1e-9)


def test_breakpoints_split_a_kink():
    result = adaptive_quadrature(lambda x: np.abs(x - 0.3), (0.0, 1.0), 1e-12, breakpoints=(0.3,))
    assert result.value == pytest.approx(0.5 * 0.3**2 + 0.5 * 0.7**2, abs=1e-12)


def test_cumulative_quadrature_matches_closed_form():
    grid = np.linspace(0.0, 1.0, 33)
    totals = cumulative_quadrature(lambda y: 3 * y**2, grid)
    assert np.allclose(totals, grid**3, atol=1e-12)


def test_cumulative_quadrature_handles_repeated_points():
    grid = np.array([0.0, 0.25, 0.25, 1.0])
    totals = cumulative_quadrature(lambda y: np.ones_like(y), grid)
    assert np.allclose(totals, [0.0, 0.25, 0.25, 1.0])


def test_empty_interval_is_zero():
    assert adaptive_quadrature(lambda x: x, (0.5, 0.5)).value == 0.0


def test_nan_integrand_raises():
    with pytest.raises(QuadratureError):
        adaptive_quadrature(lambda x: np.full_like(x, np.nan), (0.0, 1.0))


def test_budget_exhaustion_raises():
    with pytest.raises(QuadratureError):
        integrate_cells(lambda x: np.sin(1.0 / x), [0.0, 1.0], 1e-14, max_nodes=2_000)
