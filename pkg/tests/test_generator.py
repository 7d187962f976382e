import itertools
import random
from fractions import Fraction

import pytest

from qtazrp_lab.config import OccupancyConfig
from qtazrp_lab.errors import DomainError
from qtazrp_lab.generator import (
    covers,
    embedded_transition,
    jump_rates,
    particle_rates,
    q_int_value,
    rank,
    state_rates,
    total_rate,
)
from qtazrp_lab.qalg import Q, QRationalFunction, q_int, rf_eq, rf_eval


def test_single_particle_rate_is_one():
    (tr,) = jump_rates((3,), 0.4)
    assert tr.rate == 1
    assert tr.target == (4,)
    assert total_rate((3,), 0.4) == 1


def test_figure_site_rates_telescope():
    site = OccupancyConfig.from_counts(3, {(0, 1): 1, (0, 2): 2, (0, 3): 2})
    rates = [tr.rate for tr in jump_rates(site, Q)]
    assert rf_eq(rates[0], QRationalFunction(q_int(1)))
    assert rf_eq(rates[1], Q * QRationalFunction(q_int(2)))
    assert rf_eq(rates[2], Q**3 * QRationalFunction(q_int(2)))
    assert rf_eq(sum(rates, 0 * Q), QRationalFunction(q_int(5)))


def test_empty_configuration():
    assert jump_rates(OccupancyConfig(2), 0.5) == []
    with pytest.raises(DomainError):
        total_rate(OccupancyConfig(2), 0.5)


def test_total_rate_examples():
    q = Fraction(1, 3)
    stacked = OccupancyConfig.from_counts(1, {(0, 1): 4})
    assert total_rate(stacked, q) == q_int_value(4, q) == 1 + q + q**2 + q**3
    assert total_rate((0, 5), q) == 2


@pytest.mark.parametrize("n", range(1, 5))
def test_site_total_is_q_integer_for_every_occupancy(n):
    for counts in itertools.product(range(4), repeat=n):
        m = sum(counts)
        if not 0 < m <= 6:
            continue
        site = OccupancyConfig.from_counts(n, {(0, j + 1): c for j, c in enumerate(counts)})
        assert rf_eq(sum((tr.rate for tr in jump_rates(site, Q)), 0 * Q), QRationalFunction(q_int(m)))


def test_rates_decrease_with_species_index():
    q = 0.7
    site = OccupancyConfig.from_counts(3, {(0, 1): 1, (0, 2): 1, (0, 3): 1})
    rates = [tr.rate for tr in jump_rates(site, q)]
    assert rates == sorted(rates, reverse=True)


def test_embedded_transition_examples():
    q = Fraction(2, 5)
    assert embedded_transition((0, 3), (1, 3), q) == Fraction(1, 2)
    assert embedded_transition((0,), (1,), q) == 1
    assert embedded_transition((0, 0), (1, 0), q) == 1 / (1 + q)
    assert embedded_transition((0, 0), (0, 1), q) == q / (1 + q)
    assert embedded_transition((0, 0), (2, 0), q) == 0


def test_embedded_chain_is_a_distribution_on_covers():
    q = Fraction(3, 5)
    for x in itertools.product(range(-1, 2), repeat=3):
        probs = {target: embedded_transition(x, target, q) for target, _ in state_rates(x, q)}
        assert sum(probs.values()) == 1
        assert all(covers(x, z) and rank(z) == rank(x) + 1 for z in probs)


def test_symbolic_and_numeric_rates_agree():
    rng = random.Random(7)
    for _ in range(20):
        q = rng.uniform(0.05, 0.95)
        x = tuple(rng.randint(0, 2) for _ in range(4))
        exact_rates = [rf_eval(r, q) for _, r in state_rates(x, Q)]
        numeric = [r for _, r in state_rates(x, q)]
        assert exact_rates == pytest.approx(numeric, rel=1e-12)


def test_particle_rates_sum_to_site_totals():
    q = 0.3
    positions, species = (0, 0, 0, 2), (2, 1, 2, 1)
    rates = particle_rates(positions, species, [q**k for k in range(4)])
    assert rates == pytest.approx([q, 1.0, q**2, 1.0])
    assert sum(rates) == pytest.approx(float(total_rate(OccupancyConfig.from_particles(2, zip(positions, species)), q)))


def test_covers_and_rank():
    x = (0, -1, -2)
    assert covers(x, (1, -1, -2))
    assert not covers(x, (1, 0, -2))
    assert not covers(x, (0, -1))
    assert rank(x) == -3
