"""Jump rates, the embedded jump chain and the graded-poset structure.

At a site holding ``m_1, ..., m_n`` particles of species ``1..n``, a species-j particle jumps one
site to the right at rate ``q^(m_1+...+m_{j-1}) [m_j]_q``; the rates at a site telescope to
``[m_1+...+m_n]_q``. Every function accepts a numeric ``q`` (float or Fraction) or the symbolic
:data:`qtazrp_lab.qalg.Q`, in which case rates are exact rational functions.
"""

from dataclasses import dataclass
from typing import Any, Sequence, Union

from .config import LabeledConfig, OccupancyConfig
from .errors import DomainError
from .qalg import QPolynomial, QRationalFunction, q_int

State = Union[LabeledConfig, OccupancyConfig]


@dataclass(frozen=True)
class Transition:
    target: State
    rate: Any
    site: int
    species: int


@dataclass(frozen=True)
class RankedState:
    state: LabeledConfig
    rank: int


def q_int_value(m: int, q):
    """``[m]_q`` for numeric or symbolic q."""
    if isinstance(q, QRationalFunction):
        return QRationalFunction(q_int(m))
    return sum((q**k for k in range(m)), 0 * q)


def _rate(higher: int, m: int, q):
    if isinstance(q, QRationalFunction):
        return QRationalFunction(QPolynomial.monomial(higher) * q_int(m))
    return q**higher * q_int_value(m, q)


def _sites(state: State) -> dict[int, dict[int, int]]:
    sites: dict[int, dict[int, int]] = {}
    if isinstance(state, OccupancyConfig):
        for (site, species), count in state.items:
            sites.setdefault(site, {})[species] = count
    else:
        for i, site in enumerate(state, start=1):
            sites.setdefault(site, {})[i] = 1
    return sites


def jump_rates(state: State, q) -> list[Transition]:
    """All one-particle moves out of ``state`` with their rates, ordered by (site, species)."""
    out = []
    for site, by_species in sorted(_sites(state).items()):
        higher = 0
        for species in sorted(by_species):
            m = by_species[species]
            if isinstance(state, OccupancyConfig):
                target: State = state.moved(site, species)
            else:
                target = tuple(v + 1 if i == species else v for i, v in enumerate(state, start=1))
            out.append(Transition(target, _rate(higher, m, q), site, species))
            higher += m
    return out


def state_rates(state: State, q) -> list[tuple[State, Any]]:
    return [(tr.target, tr.rate) for tr in jump_rates(state, q)]


def total_rate(state: State, q):
    """``lambda = -L(state, state) = sum over sites of [m_site]_q``."""
    totals = [sum(by_species.values()) for by_species in _sites(state).values()]
    if not totals:
        raise DomainError("the empty configuration is absorbing: total rate is zero")
    if isinstance(q, QRationalFunction):
        return QRationalFunction(sum((q_int(m) for m in totals), QPolynomial()))
    return sum(q_int_value(m, q) for m in sorted(totals))


def embedded_transition(state: State, target: State, q):
    """Jump-chain probability ``rate(state -> target) / lambda_state``."""
    lam = total_rate(state, q)
    for tr in jump_rates(state, q):
        if tr.target == target:
            return tr.rate / lam
    return 0 * lam


def particle_rates(positions: Sequence[int], species: Sequence[int], qpow: Sequence[float]) -> list[float]:
    """Per-particle rates ``qpow[k]``, k the number of particles ahead in priority at the same site.

    Particles sharing a site are ranked by ``(species, index)``; summing over the particles of one
    species at a site gives ``q^(higher) [m]_q``.
    """
    rates = []
    for i, (x, s) in enumerate(zip(positions, species)):
        ahead = sum(1 for j, (y, t) in enumerate(zip(positions, species)) if y == x and (t, j) < (s, i))
        rates.append(qpow[ahead])
    return rates


def covers(x: Sequence[int], z: Sequence[int]) -> bool:
    """True iff ``z = x + e_j`` for some j."""
    if len(x) != len(z):
        return False
    diff = [b - a for a, b in zip(x, z)]
    return sorted(diff) == [0] * (len(diff) - 1) + [1]


def rank(x: Sequence[int]) -> int:
    return sum(x)


def ranked(x: Sequence[int]) -> RankedState:
    return RankedState(tuple(x), rank(x))
