"""Seeded Gillespie simulation of finite systems.

Every replica owns a counter-based stream: its key is ``mix64(seed + GOLDEN * (replica + 1))``
and its k-th uniform is ``(mix64(key + GOLDEN * (k + 1)) >> 11) * 2^-53`` (splitmix64). Step
``s`` of a trajectory uses draw ``2s`` for the holding time and draw ``2s + 1`` to pick the
jumping particle, so an outcome depends only on ``(query, seed, replica)`` and never on the
backend, the chunking or the number of workers.

Particles sharing a site are served in ``(species, index)`` order; the particle with ``k``
particles ahead of it jumps at rate ``q^k``, which sums to ``[m]_q`` over the site.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from multiprocessing import Pool
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .codegen.cdf_kernel import CdfQuery
from .codegen.hitting_kernel import HittingQuery
from .config import LabeledConfig, OccupancyConfig
from .errors import DomainError
from .generator import particle_rates
from .qalg import check_q
from .settings import DEFAULTS

logger = logging.getLogger(__name__)

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_UNIT = 2.0**-53

Query = Union[CdfQuery, HittingQuery]


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * _MIX1) & MASK
    z = ((z ^ (z >> 27)) * _MIX2) & MASK
    return z ^ (z >> 31)


def stream_key(seed: int, replica: int) -> int:
    return mix64(seed + GOLDEN * (replica + 1))


def stream_uniform(key: int, k: int) -> float:
    """k-th uniform in [0, 1) of the stream with ``key``."""
    return (mix64(key + GOLDEN * (k + 1)) >> 11) * _UNIT


def priority_rates(pos: Sequence[int], species: Sequence[int], qpow: Sequence[float]) -> tuple[list[float], float]:
    """Per-particle rates and their sum, accumulated left to right."""
    rates = particle_rates(pos, species, qpow)
    lam = 0.0
    for r in rates:
        lam += r
    return rates, lam


def pick_index(rates: Sequence[float], target: float) -> int:
    acc = 0.0
    for i, r in enumerate(rates):
        acc += r
        if target < acc:
            return i
    return len(rates) - 1


_U64 = np.uint64


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> _U64(30))
    z = z * _U64(_MIX1)
    z = z ^ (z >> _U64(27))
    z = z * _U64(_MIX2)
    return z ^ (z >> _U64(31))


def _keys_array(seed: int, replicas: np.ndarray) -> np.ndarray:
    return _mix64_array(_U64(seed & MASK) + _U64(GOLDEN) * (replicas + _U64(1)))


def _uniform_array(keys: np.ndarray, k: int) -> np.ndarray:
    draws = _mix64_array(keys + _U64((GOLDEN * (k + 1)) & MASK))
    return (draws >> _U64(11)).astype(np.float64) * _UNIT


def _precedence(species: Sequence[int]) -> np.ndarray:
    """``P[j, i]`` is True when particle j is served before particle i at a shared site."""
    s = np.asarray(species)
    idx = np.arange(len(s))
    return (s[:, None] < s[None, :]) | ((s[:, None] == s[None, :]) & (idx[:, None] < idx[None, :]))


def _numpy_outcomes(query: Query, replicas: np.ndarray) -> np.ndarray:
    """Indicator outcomes of ``query`` for a batch of replica indices, all advanced in lockstep."""
    hitting = isinstance(query, HittingQuery)
    bound = np.asarray(query.target if hitting else query.bounds, dtype=np.int64)
    n = query.n
    out = np.zeros(len(replicas))
    if np.any(np.asarray(query.positions) > bound):
        return out

    replicas = np.asarray(replicas, dtype=np.uint64)
    pos = np.tile(np.asarray(query.positions, dtype=np.int64), (len(replicas), 1))
    keys = _keys_array(query.seed, replicas)
    qpow = np.asarray(query.qpow)
    ahead_of = _precedence(query.species)
    time = np.zeros(len(replicas))
    active = np.arange(len(replicas))
    step = 0
    while active.size:
        p = pos[active]
        if hitting:
            arrived = np.all(p == bound, axis=1)
            out[active[arrived]] = 1.0
            active, p = active[~arrived], p[~arrived]
            if not active.size:
                break
        ahead = ((p[:, :, None] == p[:, None, :]) & ahead_of[None]).sum(axis=1)
        cum = np.cumsum(qpow[ahead], axis=1)
        lam = cum[:, -1]
        k = keys[active]
        if not hitting:
            time[active] += -np.log(1.0 - _uniform_array(k, 2 * step)) / lam
            expired = time[active] > query.t
            out[active[expired]] = 1.0
            keep = ~expired
            active, cum, lam, k = active[keep], cum[keep], lam[keep], k[keep]
            if not active.size:
                break
        below = (_uniform_array(k, 2 * step + 1) * lam)[:, None] < cum
        i = np.where(below.any(axis=1), below.argmax(axis=1), n - 1)
        pos[active, i] += 1
        active = active[pos[active, i] <= bound[i]]
        step += 1
    logger.debug("numpy engine: %d replicas finished after %d steps", len(replicas), step)
    return out


@lru_cache(maxsize=32)
def _batch_kernel(query: Query, backend: str) -> Callable[[np.ndarray], np.ndarray]:
    if backend == "numpy":
        return lambda replicas: _numpy_outcomes(query, replicas)
    from . import compile_kernel

    return compile_kernel(query, backend, batch_mode="numpy")


def _count_chunk(query: Query, backend: str, start: int, stop: int) -> int:
    replicas = np.arange(start, stop, dtype=np.float64)
    return int(np.asarray(_batch_kernel(query, backend)(replicas)).sum())


@dataclass(frozen=True)
class SimEstimate:
    """Indicator-mean estimate with its binomial standard error."""

    mean: float
    stderr: float
    samples: int
    seed: int
    hits: int
    first_replica: int = 0

    @classmethod
    def from_counts(cls, hits: int, samples: int, seed: int, first_replica: int = 0) -> "SimEstimate":
        if samples <= 0:
            raise DomainError(f"samples must be positive, got {samples}")
        p = hits / samples
        return cls(p, math.sqrt(p * (1.0 - p) / samples), samples, seed, hits, first_replica)

    def merge(self, other: "SimEstimate") -> "SimEstimate":
        """Pool two batches of the same query and seed over disjoint replica ranges."""
        if self.seed != other.seed:
            raise DomainError(f"cannot merge estimates with seeds {self.seed} and {other.seed}")
        lo, hi = sorted((self, other), key=lambda e: e.first_replica)
        if lo.first_replica + lo.samples > hi.first_replica:
            raise DomainError("merged estimates must cover disjoint replica ranges")
        return SimEstimate.from_counts(self.hits + other.hits, self.samples + other.samples, self.seed, lo.first_replica)

    def within(self, value: float, sigmas: Optional[float] = None) -> bool:
        sigmas = DEFAULTS.mc_sigmas if sigmas is None else sigmas
        # an estimate of exactly 0 or 1 has zero stderr; fall back to one sample's resolution
        return abs(self.mean - value) <= sigmas * max(self.stderr, 1.0 / self.samples)

    def to_json(self) -> dict:
        return {"value": self.mean, "stderr": self.stderr, "samples": self.samples, "seed": self.seed}


def run_query(query: Query, samples: Optional[int] = None, backend: Optional[str] = None, threads: Optional[int] = None,
              first_replica: int = 0, chunk: Optional[int] = None) -> SimEstimate:
    """Count successes of ``query`` over replicas ``first_replica .. first_replica + samples - 1``.

    Parameters
    ----------
    query : CdfQuery | HittingQuery
        Frozen description of the indicator to estimate; it carries the seed.
    samples : int, optional
        Number of replicas, ``DEFAULTS.samples`` when omitted.
    backend : {"numpy", "python", "cython", "c"}, optional
        Engine computing the outcomes. Compiled backends parallelise internally with OpenMP.
    threads : int, optional
        Worker processes for the ``numpy`` and ``python`` backends. Results do not depend on it.

    Returns
    -------
    SimEstimate
    """
    samples = DEFAULTS.samples if samples is None else int(samples)
    backend = backend or DEFAULTS.backend
    chunk = chunk or DEFAULTS.chunk
    if samples <= 0:
        raise DomainError(f"samples must be positive, got {samples}")
    if backend not in ("numpy", "python", "cython", "c"):
        raise DomainError(f"unknown backend {backend!r}")
    tasks = [(query, backend, lo, min(lo + chunk, first_replica + samples)) for lo in range(first_replica, first_replica + samples, chunk)]
    if threads and threads > 1 and backend in ("numpy", "python") and len(tasks) > 1:
        with Pool(processes=min(threads, len(tasks))) as pool:
            counts = pool.starmap(_count_chunk, tasks)
    else:
        counts = [_count_chunk(*task) for task in tasks]
    estimate = SimEstimate.from_counts(sum(counts), samples, query.seed, first_replica)
    logger.info("%s: %d/%d hits over %d chunks (%s)", type(query).__name__, estimate.hits, samples, len(tasks), backend)
    return estimate


def _check_pair(x: Sequence[int], y: Sequence[int], q: float) -> None:
    if len(x) != len(y) or not x:
        raise DomainError(f"x and y must be nonempty and of equal length, got {tuple(x)} and {tuple(y)}")
    check_q(q)


def estimate_cdf(x: Sequence[int], y: Sequence[int], t: float, q: float, samples: Optional[int] = None, seed: Optional[int] = None,
                 backend: Optional[str] = None, threads: Optional[int] = None, first_replica: int = 0) -> SimEstimate:
    """``P_x(X(t) <= y)`` for one particle per species."""
    _check_pair(x, y, q)
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    seed = DEFAULTS.seed if seed is None else seed
    query = CdfQuery(tuple(x), tuple(range(1, len(x) + 1)), tuple(y), float(t), float(q), int(seed))
    return run_query(query, samples, backend, threads, first_replica)


def estimate_hitting(x: Sequence[int], y: Sequence[int], q: float, samples: Optional[int] = None, seed: Optional[int] = None,
                     backend: Optional[str] = None, threads: Optional[int] = None, first_replica: int = 0) -> SimEstimate:
    """Probability that the jump chain from ``x`` passes through ``y``."""
    _check_pair(x, y, q)
    seed = DEFAULTS.seed if seed is None else seed
    query = HittingQuery(tuple(x), tuple(y), float(q), int(seed))
    return run_query(query, samples, backend, threads, first_replica)


def estimate_qmoment(k: Sequence[int], M: Sequence[int], t: float, q: float, samples: Optional[int] = None, seed: Optional[int] = None,
                     backend: Optional[str] = None, threads: Optional[int] = None) -> SimEstimate:
    """Joint q-moment through the finite dual: ``k_j`` species-j particles start at site 0 and
    every species-j particle must still be left of ``M_(n+1-j)`` at time ``t``."""
    n = len(k)
    if len(M) != n or n == 0:
        raise DomainError(f"k and M must be nonempty and of equal length, got {tuple(k)} and {tuple(M)}")
    if any(c < 0 for c in k) or sum(k) == 0:
        raise DomainError(f"k must be nonnegative with at least one particle, got {tuple(k)}")
    if min(M) < 1:
        raise DomainError(f"M entries must be positive, got {tuple(M)}")
    check_q(q)
    species = tuple(j + 1 for j, c in enumerate(k) for _ in range(c))
    bounds = tuple(M[n - s] - 1 for s in species)
    seed = DEFAULTS.seed if seed is None else seed
    query = CdfQuery((0,) * len(species), species, bounds, float(t), float(q), int(seed))
    return run_query(query, samples, backend, threads)


def _particles(x0: Union[OccupancyConfig, LabeledConfig]) -> tuple[list[int], list[int]]:
    if isinstance(x0, OccupancyConfig):
        particles = x0.particles()
        return [site for site, _ in particles], [species for _, species in particles]
    return list(x0), list(range(1, len(x0) + 1))


def simulate(x0: Union[OccupancyConfig, LabeledConfig], t_end: float, q: float, seed: Optional[int] = None,
             replica: int = 0) -> Union[OccupancyConfig, LabeledConfig]:
    """One trajectory sample of the state at ``t_end``, returned in the input's representation."""
    check_q(q)
    if t_end < 0:
        raise DomainError(f"t_end must be nonnegative, got {t_end}")
    pos, species = _particles(x0)
    if t_end == 0 or not pos:
        return x0
    seed = DEFAULTS.seed if seed is None else seed
    qpow = [q**k for k in range(len(pos))]
    key = stream_key(seed, replica)
    time = 0.0
    step = 0
    while True:
        rates, lam = priority_rates(pos, species, qpow)
        time += -math.log(1.0 - stream_uniform(key, 2 * step)) / lam
        if time > t_end:
            break
        pos[pick_index(rates, stream_uniform(key, 2 * step + 1) * lam)] += 1
        step += 1
    logger.debug("simulate: %d jumps before t=%s", step, t_end)
    if isinstance(x0, OccupancyConfig):
        return OccupancyConfig.from_particles(x0.n, zip(pos, species))
    return tuple(pos)


# q = 0.6, t = 2, estimated from 10^7 samples; None marks the cells left blank
TABLE_OFFSETS: tuple[tuple[int, int, int], ...] = ((0, 1, 0), (0, 0, 1), (0, 0, 2), (0, 1, 4), (0, 1, 3), (0, 1, 2), (0, 1, 1))
PUBLISHED_TABLE: dict[tuple[int, int, int], tuple[Optional[float], ...]] = {
    (0, 0, 0): (0.0332632, 0.0279420, 0.0343266, 0.0727376, 0.0695906, 0.0626983, 0.0513806),
    (0, 0, -1): (0.0100777, 0.0278481, 0.0343091, 0.0727394, 0.0695814, 0.0629251, 0.0482535),
    (0, -1, 0): (0.0278073, 0.0100938, None, 0.0727483, 0.0673652, 0.0582948, None),
    (0, -1, -1): (0.0165454, 0.0121191, 0.0152055, 0.0726808, 0.0695527, 0.0628361, 0.0515214),
    (0, 0, -2): (None, None, None, 0.0726787, 0.0695210, None, None),
}


@dataclass(frozen=True)
class TableCell:
    x: tuple[int, ...]
    offset: tuple[int, ...]
    estimate: SimEstimate
    published: Optional[float]

    @property
    def y(self) -> tuple[int, ...]:
        return tuple(a + b for a, b in zip(self.x, self.offset))

    def agrees(self, sigmas: Optional[float] = None) -> bool:
        """Within ``sigmas`` combined standard errors of the published 10^7-sample value."""
        if self.published is None:
            return True
        sigmas = DEFAULTS.mc_sigmas if sigmas is None else sigmas
        published_err = math.sqrt(self.published * (1 - self.published) / 10**7)
        return abs(self.estimate.mean - self.published) <= sigmas * math.hypot(self.estimate.stderr, published_err)


def table(q: float = 0.6, t: float = 2.0, samples: Optional[int] = None, seed: Optional[int] = None, optional: bool = False,
          cells: Optional[Sequence[tuple[tuple[int, ...], tuple[int, ...]]]] = None, backend: Optional[str] = None,
          threads: Optional[int] = None) -> list[TableCell]:
    """Estimate the grid of ``P_x(X(t) <= x + offset)``.

    Blank cells of the published grid are only estimated with ``optional=True``. ``cells`` picks
    an explicit list of ``(x, offset)`` pairs instead of the grid.
    """
    if cells is None:
        cells = [(x, off) for x, row in PUBLISHED_TABLE.items() for off, v in zip(TABLE_OFFSETS, row) if v is not None or optional]
    out = []
    for x, off in cells:
        published = None
        if tuple(x) in PUBLISHED_TABLE and tuple(off) in TABLE_OFFSETS:
            published = PUBLISHED_TABLE[tuple(x)][TABLE_OFFSETS.index(tuple(off))]
        y = tuple(a + b for a, b in zip(x, off))
        estimate = estimate_cdf(x, y, t, q, samples, seed, backend, threads)
        out.append(TableCell(tuple(x), tuple(off), estimate, published))
    return out
