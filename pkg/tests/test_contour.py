import itertools
import logging
import math
from fractions import Fraction

import numpy as np
import pytest

from qtazrp_lab import contour
from qtazrp_lab.config import OccupancyConfig, canonical_order
from qtazrp_lab.contour import (
    ContourSpec,
    IntegralResult,
    a_sigma,
    antisymmetry_check,
    b_factor,
    calibrate_offset,
    cdf_contour,
    certify,
    contour_I,
    contour_I_tilde,
    contour_J,
    diffusive_contours,
    large_contours,
    mixed_contours,
    qmoment_contour,
    qmoment_integral,
    small_contours,
    sort_permutation,
    transition_prob_contour,
)
from qtazrp_lab.errors import ContourError, DomainError, PoleError, ResourceError
from qtazrp_lab.exact import cdf, duality_qmoment, finite_time_dist, forward_solve, path_decomposition_cdf
from qtazrp_lab.qalg import c_coeff, q_factorial
from qtazrp_lab.settings import DEFAULTS


def poisson_pmf(t, x):
    return math.exp(-t) * t**x / math.factorial(x)


# ------------------------------------------------------ algebraic factors


def test_b_factor_and_pole():
    w = [0.3 + 0.2j, -0.7 + 1.1j]
    q = 0.4
    assert b_factor(w, q) == pytest.approx((w[0] - w[1]) / (w[0] - q * w[1]))
    with pytest.raises(PoleError):
        b_factor([0.5, 1.25], 0.4)


@pytest.mark.parametrize("q", [0.3, 0.6])
def test_symmetrization_identity(q):
    rng = np.random.default_rng(7)
    n = 3
    w = rng.uniform(-1.5, 1.5, n) + 1j * rng.uniform(-1.5, 1.5, n)
    total = 0j
    for sigma in itertools.permutations(range(1, n + 1)):
        inverse = [sigma.index(k) + 1 for k in range(1, n + 1)]
        total += a_sigma(sigma, [w[i - 1] for i in inverse], q)
    expected = float(q_factorial(n).evaluate(q)) * b_factor(w, q)
    assert total == pytest.approx(expected, rel=1e-10)


def test_a_sigma_identity_is_one():
    assert a_sigma((1, 2, 3), [0.1j, 2.0, -1.0], 0.5) == 1
    with pytest.raises(DomainError):
        a_sigma((1, 1, 3), [0.1j, 2.0, -1.0], 0.5)


def test_sort_permutation():
    assert sort_permutation((0, 3, 1)) == (2, 3, 1)
    assert sort_permutation((2, 2, 5)) == (3, 1, 2)
    assert sort_permutation(()) == ()


# ---------------------------------------------------------- certification


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("q", [0.2, 0.6, 0.9])
def test_default_small_contours_are_certified(n, q):
    spec = small_contours(n, q)
    assert spec.N == n
    assert certify(spec, q) > 0


def test_certify_rejects_bad_contours():
    q = 0.5
    # circle around the origin
    with pytest.raises(ContourError):
        certify(ContourSpec(((1 + 0j, 1.5),), 64, "small"), q)
    # misses the pole at 1
    with pytest.raises(ContourError):
        certify(ContourSpec(((0.5 + 0j, 0.3),), 64, "small"), q)
    with pytest.raises(ContourError):
        certify(small_contours(2, q).with_nodes(63), q)
    with pytest.raises(ContourError):
        large_contours(2, q, radius=0.9)


def test_mixed_contours_enclose_small_ones():
    spec = mixed_contours(1, 3, 0.6)
    assert spec.n_large == 1
    assert certify(spec, 0.6) > 0
    with pytest.raises(DomainError):
        mixed_contours(4, 3, 0.6)


def test_spec_json_is_stable():
    spec = small_contours(2, 0.4)
    assert ContourSpec.from_json(spec.to_json()) == spec


def test_too_many_variables():
    with pytest.raises(ResourceError):
        contour.qmoment_exponents([1] * (DEFAULTS.max_contour_n + 1), 1.0, 0.5)


# ------------------------------------------------- probabilities and moments


@pytest.mark.parametrize("m", [0, 1, 3])
def test_single_particle_cdf_is_poisson(m):
    t = 1.2
    expected = sum(poisson_pmf(t, j) for j in range(m + 1))
    assert cdf_contour((0,), (m,), t, 0.6) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("x", [0, 2, 5])
def test_single_particle_transition_is_poisson(x):
    ordered = canonical_order([(x, 1)])
    assert transition_prob_contour(ordered, 1.5, 0.4) == pytest.approx(poisson_pmf(1.5, x), abs=1e-10)


def test_published_cdf_values_from_contours():
    assert cdf_contour((0, 0, 0), (0, 1, 3), 2.0, 0.6) == pytest.approx(0.0695753, abs=1e-6)
    assert cdf_contour((0, 0, 0), (0, 1, 4), 2.0, 0.6) == pytest.approx(0.0727076, abs=1e-6)


@pytest.mark.parametrize("y", [(0, 0), (0, 2), (1, 1), (1, 3)])
@pytest.mark.parametrize("q", [0.3, 0.6])
def test_cdf_contour_matches_exact(y, q):
    assert cdf_contour((0, 0), y, 1.0, q) == pytest.approx(cdf((0, 0), y, 1.0, q), abs=1e-8)


def test_qmoment_matches_duality():
    q = 0.5
    value = qmoment_contour((1, 1), (2, 1), 1.0, q)
    assert value == pytest.approx(duality_qmoment((1, 1), (2, 1), 1.0, Fraction(1, 2)), abs=1e-8)


def test_qmoment_accepts_intervals():
    by_length = qmoment_contour((1, 1), (3, 2), 0.8, 0.4)
    by_interval = qmoment_contour((1, 1), ((5, 3), (4, 3)), 0.8, 0.4)
    assert by_interval == pytest.approx(by_length, abs=1e-14)


def test_qmoment_domain_errors():
    with pytest.raises(DomainError):
        qmoment_contour((1, 1), (1, 2), 1.0, 0.5)
    with pytest.raises(DomainError):
        qmoment_contour((1, 1), (2,), 1.0, 0.5)
    with pytest.raises(DomainError):
        qmoment_contour((1, -1), (2, 1), 1.0, 0.5)


def test_cdf_contour_preconditions():
    with pytest.raises(DomainError):
        cdf_contour((0, 1), (2, 2), 1.0, 0.5)
    with pytest.raises(DomainError):
        cdf_contour((0, 0), (2, 1), 1.0, 0.5)
    assert cdf_contour((0, 0), (-1, 3), 1.0, 0.5) == 0.0


@pytest.mark.parametrize("z", [(0, 0), (1, 0), (0, 1), (2, 1), (1, 3)])
def test_labeled_transition_matches_exact(z):
    q, t = Fraction(3, 5), 0.9
    ordered = canonical_order([(z[0], 1), (z[1], 2)], (1, 1))
    exact = finite_time_dist((0, 0), (3, 3), q).prob(z, t)
    assert transition_prob_contour(ordered, t, float(q)) == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("z", [(0, 0), (1, 0), (2, 2), (3, 1)])
def test_single_species_transition_matches_exact(z):
    q, t = Fraction(2, 5), 1.1
    start = OccupancyConfig.from_counts(1, {(0, 1): 2})
    law = forward_solve(start, q, lambda s: all(site <= 3 for (site, _), _c in s.items))
    target = OccupancyConfig.from_particles(1, [(z[0], 1), (z[1], 1)])
    ordered = canonical_order([(z[0], 1), (z[1], 1)])
    assert transition_prob_contour(ordered, t, float(q)) == pytest.approx(law.prob(target, t), abs=1e-9)


def test_transition_symmetrization_leaves_value_unchanged():
    ordered = canonical_order([(2, 1), (0, 2)], (1, 1))
    plain = transition_prob_contour(ordered, 1.0, 0.5, symmetrize=False)
    symmetric = transition_prob_contour(ordered, 1.0, 0.5)
    assert plain == pytest.approx(symmetric, abs=1e-12)


def test_offset_calibration_selects_zero():
    assert calibrate_offset(0.5, 1.0) == 0


# -------------------------------------------------------------- identities


N, K, M, X = 3, 1, (2, 2), (1,)


@pytest.mark.parametrize("q, t", [(0.4, 0.7), (0.6, 1.5)])
def test_sum_of_large_integrals_is_small_integral(q, t):
    total = sum(contour_I(N, L, K, M, None, X, t, q) for L in range(K, N + 1))
    assert total == pytest.approx(contour_I_tilde(N, K, M, None, X, t, q), abs=1e-8)


def test_small_integral_is_a_probability():
    # one particle per species from 0: P(z_1 = 1, z_2 <= 2, z_3 <= 2)
    q, t = 0.5, 1.0
    value = contour_I_tilde(N, K, M, None, X, t, q)
    law = finite_time_dist((0, 0, 0), (1, 2, 2), Fraction(1, 2))
    expected = sum(law.prob(z, t) for z in law.entries if z[0] == 1)
    assert value == pytest.approx(expected, abs=1e-8)


def test_large_integral_is_scaled_mixed_integral():
    q, t, L = 0.5, 1.0, 3
    J = contour_J(K, L, L - K, M, None, X, t, q)
    c = float(c_coeff(N, K, L - K).evaluate(q))
    assert J * c == pytest.approx(contour_I(N, L, K, M, None, X, t, q), abs=1e-8)


def test_mixed_integral_recurrence():
    q, t, L, P = 0.5, 1.0, 3, 2
    lhs = contour_J(K, L, P - 1, M, None, X, t, q)
    rhs = contour_J(K, L, P, M, None, X, t, q) + q ** (P - L) * contour_J(K, L - 1, P - 1, M[: P - 1] + M[P:], None, X, t, q)
    assert lhs == pytest.approx(rhs, abs=1e-8)


@pytest.mark.parametrize("k, exponents", [(1, (2, 2, 0)), (2, (1, 3, 3))])
def test_antisymmetric_integrand_vanishes(k, exponents):
    assert antisymmetry_check(k, exponents, 1.0, 0.5) < 1e-8


def test_family_argument_errors():
    with pytest.raises(DomainError):
        contour_I(2, 3, 1, (1, 1), None, (0,), 1.0, 0.5)
    with pytest.raises(DomainError):
        contour_J(1, 2, 3, (1,), None, (0,), 1.0, 0.5)
    with pytest.raises(DomainError):
        antisymmetry_check(1, (1, 2), 1.0, 0.5)


def test_diffusive_contours_shrink_towards_the_origin():
    spec = diffusive_contours(2, 0.5, 400)
    assert spec.kind == "diffusive"
    assert spec.nodes == 1024
    (c1, r1), (c2, r2) = spec.circles
    assert c1 == c2 == 1
    assert 1 - r2 == pytest.approx(0.075)
    assert 1 - r1 == pytest.approx(0.25 * 0.075)
    with pytest.raises(ContourError):
        diffusive_contours(2, 0.5, 1)
    with pytest.raises(DomainError):
        diffusive_contours(2, 0.5, 0)


# ------------------------------------------------------------ quadrature


def test_odd_node_counts_are_rejected():
    with pytest.raises(ContourError):
        ContourSpec(((0.5 + 0j, 0.6),), 63, "small")
    with pytest.raises(ContourError):
        small_contours(2, 0.5, nodes=7)


@pytest.mark.parametrize("M_w", [(3,), (4, 2, 1)])
def test_error_estimate_is_non_negative_for_odd_dimension(M_w):
    result = qmoment_integral(M_w, 1.0, 0.5, nodes=16)
    assert result.est_error >= 0
    assert result.nodes == 16


def test_scaling_keeps_the_error_estimate_positive(caplog):
    result = IntegralResult(0.25 + 0j, 1e-4, 16).scaled(-2.0)
    assert result.value == -0.5
    assert result.est_error == pytest.approx(2e-4)
    with caplog.at_level(logging.WARNING, logger="qtazrp_lab.contour"):
        result.as_real("q-moment")
    assert "2.000e-04 at 16 nodes" in caplog.text


@pytest.mark.parametrize("M_w", [(3, 1), (4, 2, 1)])
@pytest.mark.parametrize("q", [0.3, 0.6])
def test_default_quadrature_converges(M_w, q):
    result = qmoment_integral(M_w, 2.0, q)
    assert 0 <= result.est_error < DEFAULTS.quad_tol
    assert result.nodes <= DEFAULTS.max_nodes
    finer = qmoment_integral(M_w, 2.0, q, nodes=2 * result.nodes)
    assert abs(finer.value - result.value) <= result.est_error + 1e-12


def test_low_q_three_species_cdf_is_accurate():
    assert cdf_contour((0, 0, 0), (0, 1, 3), 2.0, 0.3) == pytest.approx(cdf((0, 0, 0), (0, 1, 3), 2.0, 0.3), abs=1e-8)


def alternative_family(n, q):
    """A certified small family far from the default one, with a node count that resolves it."""
    default = small_contours(n, q).circles
    best, best_shift = None, 0.0
    for h, a, g in itertools.product(np.linspace(0.1, 1.0, 10), np.linspace(0.5, 0.9, 9), np.linspace(1.05, 3.0, 14)):
        circles = contour._family(n, q, float(h), float(a), float(g))
        if min(contour._small_margins(circles, q)) < DEFAULTS.contour_margin:
            continue
        if min(rho - abs(1 - c) for c, rho in circles) < contour.POLE_CLEARANCE:
            continue
        ratio = contour._worst_ratio(circles, q)
        if ratio >= 0.98:
            continue
        shift = max(abs(c - c0) + abs(rho - r0) for (c, rho), (c0, r0) in zip(circles, default))
        if shift > best_shift:
            best, best_shift = (circles, ratio), shift
    assert best is not None and best_shift > 0.02
    circles, ratio = best
    nodes = 256
    while ratio**nodes > 1e-16 and nodes < 4096:
        nodes *= 2
    return ContourSpec(circles, nodes, "small")


@pytest.mark.slow
@pytest.mark.parametrize("M_w", [(3, 1), (4, 2, 1)])
@pytest.mark.parametrize("q", [0.3, 0.6])
def test_value_does_not_depend_on_the_contours(M_w, q):
    spec = alternative_family(len(M_w), q)
    assert certify(spec, q) > 0
    moved = qmoment_integral(M_w, 2.0, q, spec=spec)
    assert moved.est_error < DEFAULTS.quad_tol
    assert moved.value == pytest.approx(qmoment_integral(M_w, 2.0, q).value, abs=1e-8)


def cdf_instances(max_rise):
    """Equal starts at 0 and bounds ``0 <= y_1 <= ... <= y_N`` with ``sum(y) <= max_rise``."""
    for n in (1, 2, 3):
        for y in itertools.combinations_with_replacement(range(max_rise + 1), n):
            if sum(y) <= max_rise:
                yield (0,) * n, y


@pytest.mark.slow
@pytest.mark.parametrize("x, y", list(cdf_instances(5)))
@pytest.mark.parametrize("q", [0.3, 0.6])
@pytest.mark.parametrize("t", [0.5, 2.0])
def test_three_methods_agree(x, y, q, t):
    exact = cdf(x, y, t, q)
    assert cdf_contour(x, y, t, q) == pytest.approx(exact, abs=1e-7)
    assert path_decomposition_cdf(x, y, t, q) == pytest.approx(exact, abs=1e-7)
