import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from qtazrp_lab import compile_kernel
from qtazrp_lab.codegen.cdf_kernel import CdfQuery
from qtazrp_lab.codegen.hitting_kernel import HittingQuery
from qtazrp_lab.config import OccupancyConfig
from qtazrp_lab.errors import DomainError
from qtazrp_lab.exact import cdf, duality_qmoment, hitting_prob
from qtazrp_lab.montecarlo import (
    GOLDEN,
    PUBLISHED_TABLE,
    TABLE_OFFSETS,
    SimEstimate,
    _numpy_outcomes,
    _uniform_array,
    estimate_cdf,
    estimate_hitting,
    estimate_qmoment,
    mix64,
    pick_index,
    priority_rates,
    run_query,
    simulate,
    stream_key,
    stream_uniform,
    table,
)

SEED = 12345


# ------------------------------------------------------------------ streams


def test_mix64_matches_splitmix64_reference():
    # first output of splitmix64 seeded with 0
    assert mix64(GOLDEN) == 0xE220A8397B1DCDAF


def test_stream_uniforms_in_unit_interval():
    key = stream_key(SEED, 3)
    draws = [stream_uniform(key, k) for k in range(1000)]
    assert all(0.0 <= u < 1.0 for u in draws)
    assert len(set(draws)) == len(draws)
    assert stream_key(SEED, 3) != stream_key(SEED, 4)


def test_vectorised_stream_matches_scalar_stream():
    replicas = np.arange(50, dtype=np.uint64)
    keys = np.array([stream_key(SEED, int(r)) for r in replicas], dtype=np.uint64)
    for k in (0, 1, 17):
        expected = [stream_uniform(stream_key(SEED, int(r)), k) for r in replicas]
        np.testing.assert_array_equal(_uniform_array(keys, k), expected)


def test_priority_rates_telescope():
    rates, lam = priority_rates([0, 0, 0, 2], [1, 2, 2, 1], [1.0, 0.5, 0.25, 0.125])
    assert rates == [1.0, 0.5, 0.25, 1.0]
    assert lam == pytest.approx(2.75)


def test_pick_index():
    rates = [1.0, 0.5, 0.25]
    assert pick_index(rates, 0.0) == 0
    assert pick_index(rates, 1.2) == 1
    assert pick_index(rates, 1.5) == 2
    assert pick_index(rates, 1.75) == 2


# ---------------------------------------------------------------- estimates


def test_estimate_from_counts():
    est = SimEstimate.from_counts(25, 100, SEED)
    assert est.mean == 0.25
    assert est.stderr == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
    assert est.to_json() == {"value": 0.25, "stderr": est.stderr, "samples": 100, "seed": SEED}
    with pytest.raises(DomainError):
        SimEstimate.from_counts(0, 0, SEED)


def test_within_uses_sample_resolution_for_degenerate_estimates():
    est = SimEstimate.from_counts(0, 1000, SEED)
    assert est.stderr == 0.0
    assert est.within(0.003)
    assert not est.within(0.01)


def test_merge_rules():
    a = SimEstimate.from_counts(10, 100, SEED, first_replica=0)
    b = SimEstimate.from_counts(30, 200, SEED, first_replica=100)
    merged = a.merge(b)
    assert (merged.hits, merged.samples, merged.first_replica) == (40, 300, 0)
    assert b.merge(a) == merged
    with pytest.raises(DomainError):
        a.merge(SimEstimate.from_counts(10, 100, SEED, first_replica=50))
    with pytest.raises(DomainError):
        a.merge(SimEstimate.from_counts(10, 100, SEED + 1, first_replica=100))


def test_estimates_are_reproducible():
    first = estimate_cdf((0, 0, 0), (0, 1, 3), 2.0, 0.6, samples=3000, seed=SEED)
    second = estimate_cdf((0, 0, 0), (0, 1, 3), 2.0, 0.6, samples=3000, seed=SEED)
    assert first == second
    other = estimate_cdf((0, 0, 0), (0, 1, 3), 2.0, 0.6, samples=3000, seed=SEED + 1)
    assert other.seed == SEED + 1 and other.samples == 3000


def test_chunking_and_workers_do_not_change_results():
    query = CdfQuery((0, 0), (1, 2), (1, 1), 1.0, 0.5, SEED)
    reference = run_query(query, 2000, "numpy", chunk=2000)
    assert run_query(query, 2000, "numpy", chunk=300) == reference
    assert run_query(query, 2000, "numpy", threads=2, chunk=500) == reference


def test_split_runs_merge_into_the_full_run():
    full = estimate_cdf((0, -1), (2, 1), 1.0, 0.4, samples=1500, seed=SEED)
    head = estimate_cdf((0, -1), (2, 1), 1.0, 0.4, samples=600, seed=SEED)
    tail = estimate_cdf((0, -1), (2, 1), 1.0, 0.4, samples=900, seed=SEED, first_replica=600)
    assert head.merge(tail) == full


def test_python_kernel_matches_numpy_engine():
    replicas = np.arange(300, dtype=np.float64)
    for query in (CdfQuery((0, 0, 0), (1, 2, 3), (0, 1, 3), 2.0, 0.6, SEED), HittingQuery((0, -1, -1), (1, 1, 0), 0.6, SEED)):
        kernel = compile_kernel(query, "python", batch_mode="numpy")
        np.testing.assert_array_equal(kernel(replicas), _numpy_outcomes(query, replicas))


@pytest.mark.parametrize("x, y, t, q", [((0, 0), (1, 1), 1.0, 0.5), ((0, 0, 0), (0, 1, 3), 2.0, 0.6), ((0, -1, -1), (1, 1, 0), 0.5, 0.3)])
def test_cdf_estimate_agrees_with_exact(x, y, t, q):
    est = estimate_cdf(x, y, t, q, samples=20000, seed=SEED)
    assert est.within(cdf(x, y, t, q))


def test_hitting_estimate_agrees_with_exact():
    x, y = (0, -1, -1), (1, 1, 0)
    est = estimate_hitting(x, y, 0.6, samples=20000, seed=SEED)
    assert est.within(hitting_prob(x, y, mode="numeric", q=0.6))
    assert estimate_hitting((0, 1), (1, 0), 0.6, samples=10).mean == 0.0


def test_qmoment_estimate_agrees_with_duality():
    est = estimate_qmoment((1, 1), (3, 1), 1.0, 0.5, samples=20000, seed=SEED)
    assert est.within(duality_qmoment((1, 1), (3, 1), 1.0, Fraction(1, 2)))


def test_estimate_argument_errors():
    with pytest.raises(DomainError):
        estimate_cdf((0, 0), (1, 1), 1.0, 0.5, samples=0)
    with pytest.raises(DomainError):
        estimate_cdf((0, 0), (1, 1), -1.0, 0.5, samples=10)
    with pytest.raises(DomainError):
        estimate_cdf((0, 0), (1,), 1.0, 0.5, samples=10)
    with pytest.raises(DomainError):
        estimate_cdf((0, 0), (1, 1), 1.0, 0.5, samples=10, backend="fortran")
    with pytest.raises(DomainError):
        estimate_qmoment((0, 0), (2, 1), 1.0, 0.5, samples=10)


# --------------------------------------------------------------- trajectories


def test_simulate_at_time_zero_returns_start():
    assert simulate((0, -1, 2), 0.0, 0.5) == (0, -1, 2)
    start = OccupancyConfig.from_counts(2, {(0, 1): 2, (0, 2): 1})
    assert simulate(start, 0.0, 0.5) is start
    with pytest.raises(DomainError):
        simulate((0,), -1.0, 0.5)


def test_simulate_moves_right_and_keeps_particles():
    start = OccupancyConfig.from_counts(2, {(0, 1): 2, (1, 2): 1})
    end = simulate(start, 3.0, 0.4, seed=SEED, replica=5)
    assert end.species_counts() == start.species_counts()
    assert simulate(start, 3.0, 0.4, seed=SEED, replica=5) == end
    labeled = simulate((0, 0, -1), 3.0, 0.4, seed=SEED)
    assert all(b >= a for a, b in zip((0, 0, -1), labeled))


def test_single_particle_positions_are_poisson():
    t, n = 1.5, 4000
    counts = Counter(min(simulate((0,), t, 0.5, seed=SEED, replica=r)[0], 5) for r in range(n))
    pmf = [stats.poisson.pmf(k, t) for k in range(5)]
    expected = [n * p for p in pmf] + [n * (1 - sum(pmf))]
    observed = [counts.get(k, 0) for k in range(6)]
    assert stats.chisquare(observed, expected).pvalue > 1e-4


# ------------------------------------------------------------------- table


def test_published_table_layout():
    assert all(len(row) == len(TABLE_OFFSETS) for row in PUBLISHED_TABLE.values())
    assert PUBLISHED_TABLE[(0, 0, 0)][TABLE_OFFSETS.index((0, 1, 3))] == 0.0695906


def test_table_cell_agrees_with_published_value():
    (cell,) = table(cells=[((0, 0, 0), (0, 1, 3))], samples=4000, seed=SEED)
    assert cell.y == (0, 1, 3)
    assert cell.published == 0.0695906
    assert cell.agrees()


def test_table_skips_blank_cells_unless_asked():
    blank = sum(v is None for row in PUBLISHED_TABLE.values() for v in row)
    filled = sum(v is not None for row in PUBLISHED_TABLE.values() for v in row)
    assert len(table(samples=20, seed=SEED)) == filled
    assert len(table(samples=20, seed=SEED, optional=True)) == filled + blank
