"""Particle configurations and the combinatorics attached to them.

Three views of the same state are used throughout:

* ``LabeledConfig``: a bare tuple ``(x_1, ..., x_N)`` giving the site of the species-i particle,
  the state of the finite dual process.
* :class:`OccupancyConfig`: species-by-site counts, the general state. Infinite counts are only
  allowed in duality source configurations.
* :class:`OrderedConfig`: the canonical ``(x, sigma)`` pair with weakly decreasing ``x`` and the
  fewest-inversion ``sigma``.
"""

import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping, Sequence, Union

from .errors import DomainError
from .qalg import QRationalFunction, q_factorial

LabeledConfig = tuple[int, ...]
Count = Union[int, float]

INF = math.inf


def labeled(x: Iterable[int]) -> LabeledConfig:
    return tuple(int(v) for v in x)


def shift(x: Sequence[int], j: int, k: int = 1) -> LabeledConfig:
    """Move the species-j particle (1-based) by k sites."""
    out = list(x)
    out[j - 1] += k
    return tuple(out)


@dataclass(frozen=True)
class OccupancyConfig:
    """Finite-support occupation counts ``eta_i^x`` keyed by ``(site, species)``."""

    n: int
    items: tuple[tuple[tuple[int, int], Count], ...] = ()
    source: bool = False

    def __post_init__(self) -> None:
        merged: dict[tuple[int, int], Count] = {}
        for (site, species), count in self.items:
            if not 1 <= species <= self.n:
                raise DomainError(f"species {species} outside 1..{self.n}")
            if count == INF:
                if not self.source:
                    raise DomainError("infinite occupancy is only allowed in source configurations")
            elif count < 0 or count != int(count):
                raise DomainError(f"occupancy must be a nonnegative integer, got {count}")
            merged[(int(site), int(species))] = merged.get((int(site), int(species)), 0) + count
        items = tuple(sorted((k, v if v == INF else int(v)) for k, v in merged.items() if v != 0))
        object.__setattr__(self, "items", items)

    @classmethod
    def from_counts(cls, n: int, counts: Mapping[tuple[int, int], Count], source: bool = False) -> "OccupancyConfig":
        return cls(n, tuple(counts.items()), source)

    @classmethod
    def from_particles(cls, n: int, particles: Iterable[tuple[int, int]]) -> "OccupancyConfig":
        """Build from ``(site, species)`` pairs, one entry per particle."""
        return cls(n, tuple(Counter((int(s), int(j)) for s, j in particles).items()))

    @classmethod
    def from_labeled(cls, x: Sequence[int]) -> "OccupancyConfig":
        return cls.from_particles(len(x), ((site, i + 1) for i, site in enumerate(x)))

    @property
    def counts(self) -> dict[tuple[int, int], Count]:
        return dict(self.items)

    def occupancy(self, site: int, species: int) -> Count:
        return self.counts.get((site, species), 0)

    def species_counts(self) -> tuple[Count, ...]:
        out = [0] * self.n
        for (_, species), count in self.items:
            out[species - 1] += count
        return tuple(out)

    def particles(self) -> list[tuple[int, int]]:
        """``(site, species)`` pairs with multiplicity, in canonical order."""
        if any(c == INF for _, c in self.items):
            raise DomainError("cannot list particles of a configuration with infinite occupancy")
        ordered = sorted(self.items, key=lambda kv: (-kv[0][0], kv[0][1]))
        return [key for key, count in ordered for _ in range(int(count))]

    def to_labeled(self) -> LabeledConfig:
        """Positions by species; requires exactly one particle per species."""
        if self.species_counts() != (1,) * self.n:
            raise DomainError(f"not one particle per species: counts {self.species_counts()}")
        x = [0] * self.n
        for (site, species), _ in self.items:
            x[species - 1] = site
        return tuple(x)

    def moved(self, site: int, species: int) -> "OccupancyConfig":
        """Configuration after one species particle jumps from ``site`` to ``site + 1``."""
        counts = self.counts
        if counts.get((site, species), 0) < 1:
            raise DomainError(f"no species-{species} particle at site {site}")
        counts[(site, species)] -= 1
        counts[(site + 1, species)] = counts.get((site + 1, species), 0) + 1
        return OccupancyConfig.from_counts(self.n, counts, self.source)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "particles": [
                {"site": site, "species": species, "count": "inf" if count == INF else count}
                for (site, species), count in self.items
            ],
        }


def config_from_json(data: Union[str, dict, list]) -> Union[OccupancyConfig, LabeledConfig]:
    """Inverse of :meth:`OccupancyConfig.to_json`; a bare list is read as a LabeledConfig."""
    if isinstance(data, str):
        data = json.loads(data)
    if isinstance(data, list):
        return labeled(data)
    counts = {(p["site"], p["species"]): INF if p["count"] == "inf" else int(p["count"]) for p in data["particles"]}
    return OccupancyConfig.from_counts(data["n"], counts, source=any(c == INF for c in counts.values()))


def height(eta: OccupancyConfig, y: int, j: int) -> Count:
    """Number of particles of species ``<= n+1-j`` weakly right of site ``y``."""
    if not 1 <= j <= eta.n:
        raise DomainError(f"height index j={j} outside 1..{eta.n}")
    total: Count = 0
    for (site, species), count in eta.items:
        if site >= y and species <= eta.n + 1 - j:
            if count == INF:
                raise DomainError(f"infinitely many particles weakly right of {y}")
            total += count
    return total


@dataclass(frozen=True)
class IntersectionMatrix:
    entries: tuple[tuple[int, ...], ...]

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return self.entries[i][j]

    @property
    def size(self) -> int:
        return len(self.entries)

    def tolist(self) -> list[list[int]]:
        return [list(row) for row in self.entries]


def intersection_matrix(x: Sequence[int], y: Sequence[int]) -> IntersectionMatrix:
    """``I_ij = |[x_i, y_i] ∩ [x_j, y_j]|`` over integer points."""
    if len(x) != len(y):
        raise DomainError(f"dimension mismatch: {len(x)} vs {len(y)}")
    for i, (a, b) in enumerate(zip(x, y)):
        if a > b:
            raise DomainError(f"interval {i + 1} is reversed: start {a} > end {b}")
    n = len(x)
    return IntersectionMatrix(
        tuple(tuple(max(0, min(y[i], y[j]) - max(x[i], x[j]) + 1) for j in range(n)) for i in range(n))
    )


def inversions(sigma: Sequence[int]) -> int:
    return sum(1 for i in range(len(sigma)) for j in range(i + 1, len(sigma)) if sigma[i] > sigma[j])


def _blocks(x: Sequence[int]) -> tuple[int, ...]:
    sizes: list[int] = []
    for i, v in enumerate(x):
        if i and v == x[i - 1]:
            sizes[-1] += 1
        else:
            sizes.append(1)
    return tuple(sizes)


@dataclass(frozen=True)
class OrderedConfig:
    """Canonical ``(x, sigma)`` description.

    Attributes
    ----------
    x : tuple of int
        Weakly decreasing particle sites.
    sigma : tuple of int
        Permutation of ``1..N``; the particle at position ``i`` carries label ``sigma[i]``.
    species_sizes : tuple of int
        ``(N_1, ..., N_n)``; labels ``N_1+...+N_{j-1}+1 .. N_1+...+N_j`` are species ``j``.
    """

    x: tuple[int, ...]
    sigma: tuple[int, ...]
    species_sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(a < b for a, b in zip(self.x, self.x[1:])):
            raise DomainError(f"x must be weakly decreasing, got {self.x}")
        if sorted(self.sigma) != list(range(1, len(self.x) + 1)):
            raise DomainError(f"sigma {self.sigma} is not a permutation of 1..{len(self.x)}")
        if sum(self.species_sizes) != len(self.x):
            raise DomainError(f"species sizes {self.species_sizes} do not sum to N={len(self.x)}")

    @property
    def N(self) -> int:
        return len(self.x)

    @property
    def n(self) -> int:
        return len(self.species_sizes)

    def label_species(self, label: int) -> int:
        acc = 0
        for j, size in enumerate(self.species_sizes, start=1):
            acc += size
            if label <= acc:
                return j
        raise DomainError(f"label {label} outside 1..{self.N}")

    @property
    def species(self) -> tuple[int, ...]:
        """Species of the particle at each position."""
        return tuple(self.label_species(s) for s in self.sigma)

    @property
    def blocks(self) -> tuple[int, ...]:
        """``m(x)``: sizes of the runs of equal sites."""
        return _blocks(self.x)

    @property
    def L(self) -> tuple[tuple[int, ...], ...]:
        """``L[i][j]``: number of species ``j+1`` particles in block ``i+1``."""
        rows = []
        start = 0
        species = self.species
        for size in self.blocks:
            counts = Counter(species[start : start + size])
            rows.append(tuple(counts.get(j, 0) for j in range(1, self.n + 1)))
            start += size
        return tuple(rows)

    @property
    def inv(self) -> int:
        return inversions(self.sigma)

    def particles(self) -> Counter:
        """Multiset of ``(site, species)`` described by this pair."""
        return Counter(zip(self.x, self.species))


def canonical_order(particles: Iterable[tuple[int, int]], species_sizes: Sequence[int] | None = None) -> OrderedConfig:
    """Fewest-inversion ``(x, sigma)`` for a multiset of ``(site, species)`` particles.

    Particles are sorted by site (descending) and species (ascending); labels of each species
    are handed out in that order, so no two particles of the same species form an inversion.
    """
    particles = sorted(((int(s), int(j)) for s, j in particles), key=lambda p: (-p[0], p[1]))
    counts = Counter(j for _, j in particles)
    if species_sizes is None:
        n = max(counts, default=0)
        species_sizes = tuple(counts.get(j, 0) for j in range(1, n + 1))
    species_sizes = tuple(species_sizes)
    if any(counts.get(j, 0) != size for j, size in enumerate(species_sizes, start=1)) or sum(species_sizes) != len(particles):
        raise DomainError(f"particles do not match species sizes {species_sizes}")
    next_label = [sum(species_sizes[:j]) + 1 for j in range(len(species_sizes))]
    sigma = []
    for _, j in particles:
        sigma.append(next_label[j - 1])
        next_label[j - 1] += 1
    return OrderedConfig(tuple(s for s, _ in particles), tuple(sigma), species_sizes)


def weight_W(x: Sequence[int]) -> QRationalFunction:
    """``W(x) = prod_z 1/[k_z]_q!`` with ``k_z`` the number of entries of x equal to z."""
    denominator = reduce(lambda acc, k: acc * q_factorial(k), Counter(x).values(), q_factorial(0))
    return QRationalFunction(q_factorial(0), denominator)


def multiplicity_factor(oc: OrderedConfig) -> QRationalFunction:
    """``prod_j [N_j]_q! / prod_ij [L_ij]_q!``."""
    numerator = reduce(lambda acc, k: acc * q_factorial(k), oc.species_sizes, q_factorial(0))
    denominator = reduce(lambda acc, k: acc * q_factorial(k), (v for row in oc.L for v in row), q_factorial(0))
    return QRationalFunction(numerator, denominator)


def project(xi: OccupancyConfig, N_vec: Sequence[int]) -> OccupancyConfig:
    """Merge species ``N_1+...+N_{i-1}+1 .. N_1+...+N_i`` of ``xi`` into species ``i``."""
    N = sum(N_vec)
    if any(v < 1 for v in N_vec) or xi.n != N or xi.species_counts() != (1,) * N:
        raise DomainError(f"projection {tuple(N_vec)} needs one particle of each species 1..{sum(N_vec)}")
    bounds = [sum(N_vec[: i + 1]) for i in range(len(N_vec))]
    merged = []
    for (site, species), count in xi.items:
        target = next(i for i, b in enumerate(bounds, start=1) if species <= b)
        merged.append(((site, target), count))
    return OccupancyConfig(len(N_vec), tuple(merged))
