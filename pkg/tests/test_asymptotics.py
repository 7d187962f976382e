import math

import pytest
from scipy import integrate, stats

from qtazrp_lab.asymptotics import (
    ScalingQuery,
    convergence_study,
    finite_qmoment,
    limit_density,
    limit_qmoment,
    line_heights,
    scaled_bounds,
)
from qtazrp_lab.errors import DomainError, ResourceError


@pytest.mark.parametrize("sigma", [-1.5, 0.0, 0.7, 2.0])
def test_single_species_density_is_gaussian(sigma):
    assert limit_density((sigma,), 0.5) == pytest.approx(math.exp(-sigma**2 / 2), abs=1e-9)


@pytest.mark.parametrize("sigma", [-2.0, -0.3, 0.0, 1.1, 3.0])
def test_single_species_limit_is_normal_cdf(sigma):
    assert limit_qmoment((sigma,), 0.6) == pytest.approx(stats.norm.cdf(sigma), abs=1e-9)


@pytest.mark.parametrize("N", [2, 3, 4])
@pytest.mark.parametrize("q", [0.2, 0.8])
def test_line_heights_nest(N, q):
    c = line_heights(N, q)
    assert c[0] > 0
    assert all(a < q * b for a, b in zip(c, c[1:]))


def test_two_species_limit_tails():
    q = 0.6
    assert limit_qmoment((8.0, 8.0), q) == pytest.approx(1.0, abs=1e-6)
    assert limit_qmoment((-8.0, 0.0), q) == pytest.approx(0.0, abs=1e-6)


def test_two_species_limit_is_monotone():
    q = 0.4
    grid = [-1.0, 0.0, 1.0]
    for a, b in zip(grid, grid[1:]):
        assert limit_qmoment((a, 0.5), q) <= limit_qmoment((b, 0.5), q) + 1e-10
        assert limit_qmoment((0.5, a), q) <= limit_qmoment((0.5, b), q) + 1e-10


def test_limit_values_are_probabilities():
    for sigma in [(0.0, 0.0), (1.0, -0.5), (-0.4, 0.9)]:
        value = limit_qmoment(sigma, 0.5)
        assert 0.0 <= value <= 1.0


@pytest.mark.slow
def test_two_species_limit_integrates_the_density():
    q, sigma = 0.5, (0.4, -0.2)
    lo = -8.0
    value, _ = integrate.dblquad(
        lambda v2, v1: limit_density((v1, v2), q),
        lo, sigma[0],
        lo, sigma[1],
        epsabs=1e-7,
    )
    assert limit_qmoment(sigma, q) == pytest.approx(value / (2 * math.pi), abs=1e-6)


def test_scaled_bounds():
    assert scaled_bounds((0.0, 1.0, -0.5), 100) == (100, 110, 95)
    assert scaled_bounds((0.25,), 16) == (17,)


@pytest.mark.parametrize("sigma", [-1.0, 0.0, 0.5])
def test_single_species_finite_moment_is_poisson(sigma):
    L = 100
    (M,) = scaled_bounds((sigma,), L)
    assert finite_qmoment((sigma,), 0.5, L) == pytest.approx(stats.poisson.cdf(M - 1, L), abs=1e-8)


def test_finite_moment_needs_positive_bounds():
    with pytest.raises(DomainError):
        finite_qmoment((-5.0,), 0.5, 4)


def test_scaling_query_validation():
    with pytest.raises(DomainError):
        ScalingQuery((), 0.5)
    with pytest.raises(DomainError):
        ScalingQuery((math.nan,), 0.5)
    with pytest.raises(DomainError):
        ScalingQuery((0.0,), 1.0)
    with pytest.raises(ResourceError):
        ScalingQuery((0.0,) * 5, 0.5)


@pytest.mark.slow
def test_finite_moments_converge_to_the_limit():
    points = convergence_study((0.0,), 0.5, (100, 400, 1600))
    errors = [p.error for p in points]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert points[-1].limit == pytest.approx(0.5, abs=1e-9)


@pytest.mark.slow
def test_two_species_finite_moments_converge_to_the_limit():
    points = convergence_study((1.0, 1.0), 0.6, (100, 400, 1600))
    errors = [p.error for p in points]
    assert errors[0] < 0.05
    # quadrupling L halves the error
    for a, b in zip(errors, errors[1:]):
        assert 0.35 * a < b < 0.65 * a


@pytest.mark.parametrize("sigma", [-1.2, 0.0, 0.8])
def test_single_species_limits_do_not_depend_on_q(sigma):
    assert limit_qmoment((sigma,), 0.3) == pytest.approx(limit_qmoment((sigma,), 0.8), abs=1e-10)
    assert limit_density((sigma,), 0.3) == pytest.approx(limit_density((sigma,), 0.8), abs=1e-10)
