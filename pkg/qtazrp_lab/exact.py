"""Exact solvers for finite systems.

Finite-time laws are computed in closed form as exponential polynomials
``sum_k exp(-mu_k t) p_k(t)`` by integrating the forward equations level by level: every jump
raises the rank ``sum(x)`` by one, so the transition graph is acyclic and each state's law is a
single convolution of its inflow. Rates are exact fractions of q, so equal exit rates cancel
exactly and the result is free of rounding until it is evaluated (with mpmath at a working
precision that covers the cancellation).
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Hashable, Iterable, Optional, Sequence

import mpmath

from .config import OccupancyConfig, intersection_matrix
from .errors import ConsistencyError, DomainError, ResourceError
from .generator import rank, ranked, state_rates, total_rate
from .qalg import Q, QRationalFunction, check_q, rf_eq
from .settings import DEFAULTS

logger = logging.getLogger(__name__)


def exact_q(q) -> Fraction:
    """Exact rational q; floats are read through their shortest decimal representation."""
    if isinstance(q, float):
        q = Fraction(repr(q))
    elif isinstance(q, str):
        q = Fraction(q)
    else:
        q = Fraction(q)
    return check_q(q)


def _mpf(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _log10_abs(c: Fraction) -> float:
    return math.log10(abs(c.numerator)) - math.log10(c.denominator)


@dataclass(frozen=True)
class ExpPoly:
    """``sum over mu of exp(-mu t) * sum_k c_k t^k`` with exact coefficients."""

    terms: tuple[tuple[Fraction, tuple[Fraction, ...]], ...] = ()

    @classmethod
    def from_dict(cls, d: dict[Fraction, list[Fraction]]) -> "ExpPoly":
        terms = []
        for mu in sorted(d):
            coeffs = list(d[mu])
            while coeffs and coeffs[-1] == 0:
                coeffs.pop()
            if coeffs:
                terms.append((Fraction(mu), tuple(Fraction(c) for c in coeffs)))
        return cls(tuple(terms))

    @classmethod
    def exp(cls, mu, c=1) -> "ExpPoly":
        return cls.from_dict({Fraction(mu): [Fraction(c)]})

    @classmethod
    def one(cls) -> "ExpPoly":
        return cls.exp(0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def as_dict(self) -> dict[Fraction, list[Fraction]]:
        return {mu: list(coeffs) for mu, coeffs in self.terms}

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        out = self.as_dict()
        for mu, coeffs in other.terms:
            acc = out.setdefault(mu, [])
            acc.extend([Fraction(0)] * (len(coeffs) - len(acc)))
            for k, c in enumerate(coeffs):
                acc[k] += c
        return ExpPoly.from_dict(out)

    def __mul__(self, c) -> "ExpPoly":
        c = Fraction(c)
        if c == 0:
            return ExpPoly()
        return ExpPoly(tuple((mu, tuple(c * v for v in coeffs)) for mu, coeffs in self.terms))

    __rmul__ = __mul__

    def __neg__(self) -> "ExpPoly":
        return self * -1

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        return self + (-other)

    def convolve(self, lam) -> "ExpPoly":
        """``integral_0^t exp(-lam (t - s)) f(s) ds`` for this ``f``."""
        lam = Fraction(lam)
        out: dict[Fraction, list[Fraction]] = {}

        def add(mu: Fraction, k: int, c: Fraction) -> None:
            acc = out.setdefault(mu, [])
            if len(acc) <= k:
                acc.extend([Fraction(0)] * (k + 1 - len(acc)))
            acc[k] += c

        for mu, coeffs in self.terms:
            a = lam - mu
            for j, c in enumerate(coeffs):
                if c == 0:
                    continue
                if a == 0:
                    add(lam, j + 1, c / (j + 1))
                    continue
                falling = 1
                for i in range(j + 1):
                    add(mu, j - i, c * (-1) ** i * falling / a ** (i + 1))
                    falling *= j - i
                add(lam, 0, -c * (-1) ** j * math.factorial(j) / a ** (j + 1))
        return ExpPoly.from_dict(out)

    def evaluate(self, t, precision: Optional[int] = None) -> float:
        """Value at time ``t`` with enough working digits to absorb cancellation."""
        if not self.terms:
            return 0.0
        if t < 0:
            raise DomainError(f"negative time t={t}")
        precision = precision or DEFAULTS.precision
        magnitude = max(_log10_abs(c) for _, coeffs in self.terms for c in coeffs if c != 0)
        t_digits = max(len(c) for _, c in self.terms) * math.log10(max(float(t), 1.0))
        with mpmath.workdps(precision + max(0, math.ceil(magnitude + t_digits))):
            tt = _mpf(Fraction(t) if isinstance(t, int) else t)
            total = mpmath.fsum(
                mpmath.exp(-_mpf(mu) * tt) * mpmath.polyval([_mpf(c) for c in reversed(coeffs)], tt)
                for mu, coeffs in self.terms
            )
            return float(total)


@dataclass
class ExpPolyDistribution:
    """Exact law of ``X(t)`` on a truncation box plus an absorbing escaped class."""

    start: Hashable
    q: Fraction
    entries: dict[Hashable, ExpPoly]
    escaped: ExpPoly = field(default_factory=ExpPoly)

    def prob(self, state: Hashable, t) -> float:
        return self.entries.get(state, ExpPoly()).evaluate(t)

    def mass(self, states: Optional[Iterable[Hashable]] = None) -> ExpPoly:
        selected = self.entries if states is None else {s: self.entries[s] for s in states if s in self.entries}
        return sum(selected.values(), ExpPoly())

    def total(self) -> ExpPoly:
        return self.mass() + self.escaped

    def evaluate(self, t) -> dict[Hashable, float]:
        return {state: p.evaluate(t) for state, p in self.entries.items()}

    def __len__(self) -> int:
        return len(self.entries)


def _particle_count(state) -> int:
    if isinstance(state, OccupancyConfig):
        return sum(state.species_counts())
    return len(state)


def forward_solve(start, q, in_box: Callable[[Any], bool], max_states: Optional[int] = None) -> ExpPolyDistribution:
    """Exact law of the process started at ``start``, truncated to ``in_box``.

    ``in_box`` must be closed under going backwards (true for the boxes used here, which bound
    positions from above), so states inside the box receive their exact probabilities and all
    mass that leaves is collected in ``escaped``.
    """
    qx = exact_q(q)
    max_states = max_states or DEFAULTS.max_states
    if not in_box(start):
        raise DomainError(f"start state {start} lies outside the truncation box")
    if _particle_count(start) == 0:
        return ExpPolyDistribution(start, qx, {start: ExpPoly.one()})

    entries: dict[Hashable, ExpPoly] = {}
    escaped_inflow = ExpPoly()
    level: dict[Hashable, Optional[ExpPoly]] = {start: None}
    while level:
        upcoming: dict[Hashable, ExpPoly] = {}
        for state, inflow in level.items():
            lam = total_rate(state, qx)
            p = ExpPoly.exp(lam) if inflow is None else inflow.convolve(lam)
            entries[state] = p
            if len(entries) > max_states:
                raise ResourceError(f"forward solve exceeded {max_states} states")
            for target, rate in state_rates(state, qx):
                contrib = p * rate
                if in_box(target):
                    upcoming[target] = upcoming[target] + contrib if target in upcoming else contrib
                else:
                    escaped_inflow = escaped_inflow + contrib
        level = upcoming
    logger.debug("forward solve from %s: %d states", start, len(entries))
    return ExpPolyDistribution(start, qx, entries, escaped_inflow.convolve(0))


def _check_order(x: Sequence[int], bound: Sequence[int]) -> None:
    if len(x) != len(bound):
        raise DomainError(f"dimension mismatch: {len(x)} vs {len(bound)}")
    if any(a > b for a, b in zip(x, bound)):
        raise DomainError(f"start {tuple(x)} is not componentwise below {tuple(bound)}")


@lru_cache(maxsize=128)
def _labeled_dist(x: tuple[int, ...], bound: tuple[int, ...], q: Fraction, max_states: int) -> ExpPolyDistribution:
    return forward_solve(x, q, lambda z: all(a <= b for a, b in zip(z, bound)), max_states)


def finite_time_dist(x: Sequence[int], bound: Sequence[int], q, max_states: Optional[int] = None) -> ExpPolyDistribution:
    """Exact law of the labeled process from ``x`` on ``{z : x <= z <= bound}`` plus escaped."""
    _check_order(x, bound)
    return _labeled_dist(tuple(x), tuple(bound), exact_q(q), max_states or DEFAULTS.max_states)


def cdf_exppoly(x: Sequence[int], y: Sequence[int], q, max_states: Optional[int] = None) -> ExpPoly:
    return finite_time_dist(x, y, q, max_states).mass()


def cdf(x: Sequence[int], y: Sequence[int], t, q, max_states: Optional[int] = None) -> float:
    """``P_x(X(t) <= y)`` componentwise."""
    return cdf_exppoly(x, y, q, max_states).evaluate(t)


def exit_time_survival(rates: Sequence, t=None):
    """``P(E_0 + ... + E_n >= t)`` for independent exponentials with the given (possibly
    repeated) rates; returns the ExpPoly when ``t`` is None."""
    stage = ExpPoly.exp(rates[0])
    survival = stage
    for prev, lam in zip(rates, rates[1:]):
        stage = (stage * prev).convolve(lam)
        survival = survival + stage
    return survival if t is None else survival.evaluate(t)


def path_decomposition_cdf(x: Sequence[int], y: Sequence[int], t, q, max_paths: Optional[int] = None) -> float:
    """``P_x(X(t) <= y)`` as a sum over monotone paths inside the box ``x <= z <= y``.

    A path ``x = z_0 < ... < z_n`` contributes its jump-chain probability, times the probability
    of leaving the box from ``z_n``, times ``P(E_{z_0} + ... + E_{z_n} >= t)``. Paths that end at
    ``y`` leave with probability one.
    """
    _check_order(x, y)
    qx = exact_q(q)
    max_paths = max_paths or DEFAULTS.max_paths
    in_box = lambda z: all(a <= b for a, b in zip(z, y))  # noqa: E731

    total = ExpPoly()
    n_paths = 0
    stack = [(tuple(x), Fraction(1), ExpPoly(), None)]
    while stack:
        z, weight, finished, stage = stack.pop()
        lam = total_rate(z, qx)
        stage = ExpPoly.exp(lam) if stage is None else stage
        survival = finished + stage
        moves = state_rates(z, qx)
        exit_rate = sum((rate for target, rate in moves if not in_box(target)), Fraction(0))
        if exit_rate:
            total = total + survival * (weight * exit_rate / lam)
            n_paths += 1
            if n_paths > max_paths:
                raise ResourceError(f"path decomposition exceeded {max_paths} paths")
        for target, rate in moves:
            if in_box(target):
                next_stage = (stage * lam).convolve(total_rate(target, qx))
                stack.append((target, weight * rate / lam, survival, next_stage))
    logger.debug("path decomposition %s -> %s: %d paths", tuple(x), tuple(y), n_paths)
    return total.evaluate(t)


@dataclass
class HittingTable:
    """Hitting probabilities of the jump chain, organised by rank level."""

    start: tuple[int, ...]
    probs: dict[tuple[int, ...], Any]
    levels: dict[int, list[tuple[int, ...]]]

    def level_sums(self) -> dict[int, Any]:
        return {r: sum((self.probs[z] for z in states), 0 * self.probs[self.start]) for r, states in self.levels.items()}


def hitting_table(x: Sequence[int], q=Q, depth: Optional[int] = None, bound: Optional[Sequence[int]] = None,
                  max_states: Optional[int] = None) -> HittingTable:
    """Dynamic program ``P(z) = sum_{w covered by z} P(w) T(w, z)`` from ``P(x) = 1``.

    Runs ``depth`` levels, or until the box ``z <= bound`` is exhausted.
    """
    if depth is None and bound is None:
        raise DomainError("hitting_table needs a depth or a bound")
    if not isinstance(q, QRationalFunction):
        q = check_q(q)
    max_states = max_states or DEFAULTS.max_states
    x = tuple(x)
    one = Q**0 if isinstance(q, QRationalFunction) else q**0
    probs: dict[tuple[int, ...], Any] = {x: one}
    base_rank = rank(x)
    levels = {base_rank: [x]}
    level = [x]
    steps = 0
    while level and (depth is None or steps < depth):
        upcoming: dict[tuple[int, ...], Any] = {}
        for z in level:
            lam = total_rate(z, q)
            for target, rate in state_rates(z, q):
                if bound is not None and any(a > b for a, b in zip(target, bound)):
                    continue
                contrib = probs[z] * (rate / lam)
                upcoming[target] = upcoming[target] + contrib if target in upcoming else contrib
        probs.update(upcoming)
        if len(probs) > max_states:
            raise ResourceError(f"hitting table exceeded {max_states} states")
        level = sorted(upcoming)
        steps += 1
        graded = [ranked(z) for z in level]
        if any(g.rank != base_rank + steps for g in graded):
            raise ConsistencyError(f"level {steps} from {x} left the rank {base_rank + steps}")
        if level:
            levels[base_rank + steps] = level
    return HittingTable(x, probs, levels)


def hitting_prob(x: Sequence[int], y: Sequence[int], mode: str = "symbolic", q=None, max_states: Optional[int] = None):
    """Probability that the jump chain from ``x`` ever visits ``y``.

    ``mode="symbolic"`` returns a canonical :class:`QRationalFunction`; ``mode="numeric"`` needs
    ``q`` and returns a float (or an exact Fraction for Fraction q).
    """
    if mode == "symbolic":
        qv = Q
    elif mode == "numeric":
        if q is None:
            raise DomainError("numeric hitting probabilities need q")
        qv = q if isinstance(q, Fraction) else float(check_q(q))
    else:
        raise DomainError(f"unknown mode {mode!r}")
    if len(x) != len(y):
        raise DomainError(f"dimension mismatch: {len(x)} vs {len(y)}")
    if any(a > b for a, b in zip(x, y)):
        return 0 * qv
    table = hitting_table(x, qv, bound=y, max_states=max_states)
    return table.probs.get(tuple(y), 0 * qv)


def duality_qmoment(k: Sequence[int], M: Sequence[int], t, q, max_states: Optional[int] = None) -> float:
    """q-moment of the infinite system through its finite dual.

    Starts ``k_j`` species-j particles at site 0 and returns the probability that at time ``t``
    every species-j particle is still strictly left of ``M_{n+1-j}``.
    """
    n = len(k)
    if len(M) != n:
        raise DomainError(f"k and M differ in length: {len(k)} vs {len(M)}")
    if any(v < 0 for v in k):
        raise DomainError(f"negative particle counts {tuple(k)}")
    if not all(a > b for a, b in zip(M, M[1:])) or M[-1] <= 0:
        raise DomainError(f"M must satisfy 0 < M_n < ... < M_1, got {tuple(M)}")
    start = OccupancyConfig.from_counts(n, {(0, j + 1): c for j, c in enumerate(k) if c})

    def in_box(state: OccupancyConfig) -> bool:
        return all(site < M[n - species] for (site, species), _ in state.items)

    return forward_solve(start, q, in_box, max_states).mass().evaluate(t)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "pass": self.passed, "detail": self.detail}


@dataclass
class ShiftReport:
    checks: list[Check]
    verdict: str
    symbolic: tuple[Optional[str], Optional[str]] = (None, None)

    @property
    def passed(self) -> bool:
        return self.verdict != "violation"


def verify_shift(x, y, x2, y2, t_list: Sequence[float] = (0.5, 2.0), q_list: Sequence = (0.3, 0.6),
                 symbolic: bool = True, tol: Optional[float] = None) -> ShiftReport:
    """Compare ``(x -> y)`` with ``(x2 -> y2)``.

    Verdicts: ``"equal"`` when everything agrees; ``"violation"`` when intersection numbers and
    rank differences agree but the time-t laws differ; ``"hitting-inequality"`` when only the
    jump-chain hitting probabilities differ; ``"not-comparable"`` when the intersection numbers
    or rank differences already differ.
    """
    tol = DEFAULTS.exact_tol if tol is None else tol
    checks = []
    same_i = intersection_matrix(x, y) == intersection_matrix(x2, y2)
    checks.append(Check("intersection-numbers", same_i, f"{intersection_matrix(x, y).tolist()} vs {intersection_matrix(x2, y2).tolist()}"))
    d1, d2 = rank(y) - rank(x), rank(y2) - rank(x2)
    checks.append(Check("rank-difference", d1 == d2, f"{d1} vs {d2}"))

    laws_agree = True
    for q in q_list:
        f1, f2 = cdf_exppoly(x, y, q), cdf_exppoly(x2, y2, q)
        for t in t_list:
            a, b = f1.evaluate(t), f2.evaluate(t)
            ok = abs(a - b) < tol
            laws_agree &= ok
            checks.append(Check(f"cdf q={q} t={t}", ok, f"{a:.12g} vs {b:.12g}"))

    texts: tuple[Optional[str], Optional[str]] = (None, None)
    hitting_agree = True
    if symbolic:
        h1, h2 = hitting_prob(x, y), hitting_prob(x2, y2)
        hitting_agree = rf_eq(h1, h2)
        texts = (str(h1), str(h2))
        checks.append(Check("hitting-symbolic", hitting_agree, "structurally equal" if hitting_agree else "different rational functions"))

    if not (same_i and d1 == d2):
        verdict = "not-comparable"
    elif not laws_agree:
        verdict = "violation"
    elif not hitting_agree:
        verdict = "hitting-inequality"
    else:
        verdict = "equal"
    logger.info("shift verification %s->%s vs %s->%s: %s", tuple(x), tuple(y), tuple(x2), tuple(y2), verdict)
    return ShiftReport(checks, verdict, texts)


def translation_check(x: Sequence[int], y: Sequence[int], c: int, t, q, tol: Optional[float] = None) -> Check:
    tol = DEFAULTS.exact_tol if tol is None else tol
    a = cdf(x, y, t, q)
    b = cdf([v + c for v in x], [v + c for v in y], t, q)
    return Check(f"translation by {c}", abs(a - b) < tol, f"{a:.12g} vs {b:.12g}")


def _inv_among(state: Sequence[int], species_set: Sequence[int]) -> int:
    """Pairs ``a < b`` in ``species_set`` with species b strictly right of species a."""
    return sum(1 for a, b in itertools.combinations(sorted(species_set), 2) if state[b - 1] > state[a - 1])


def q_exchangeable_law(x: Sequence[int], species_set: Sequence[int], q) -> dict[tuple[int, ...], Fraction]:
    """Random start on ``x + e_a`` for ``a`` in ``species_set`` (all at one site) with weights
    ``q^(k-1) / [r]_q`` in priority order."""
    qx = exact_q(q)
    species_set = sorted(species_set)
    if len({x[a - 1] for a in species_set}) != 1:
        raise DomainError(f"species {species_set} must share a site in {tuple(x)}")
    r = len(species_set)
    norm = sum(qx**k for k in range(r))
    law = {}
    for k, a in enumerate(species_set):
        z = tuple(v + 1 if i == a else v for i, v in enumerate(x, start=1))
        law[z] = qx**k / norm
    return law


def exchangeability_check(x: Sequence[int], species_set: Sequence[int], q, depth: int = 3) -> Check:
    """Time-t law from a q-exchangeable start stays q-exchangeable in ``species_set``.

    Checked exactly: ``mu(z) q^inv(z') == mu(z') q^inv(z)`` as exponential polynomials for every
    pair of states related by permuting the positions of the species in the set.
    """
    qx = exact_q(q)
    law0 = q_exchangeable_law(x, species_set, qx)
    bound = tuple(v + depth + 1 for v in x)
    mixed: dict[tuple[int, ...], ExpPoly] = {}
    for z, w in law0.items():
        for state, p in finite_time_dist(z, bound, qx).entries.items():
            mixed[state] = mixed.get(state, ExpPoly()) + p * w
    species_set = sorted(species_set)
    failures = 0
    for state, p in mixed.items():
        for perm in itertools.permutations(species_set):
            other = list(state)
            for a, b in zip(species_set, perm):
                other[b - 1] = state[a - 1]
            other = tuple(other)
            lhs = p * qx ** _inv_among(other, species_set)
            rhs = mixed.get(other, ExpPoly()) * qx ** _inv_among(state, species_set)
            if lhs != rhs:
                failures += 1
    return Check(f"q-exchangeable {tuple(species_set)} from {tuple(x)}", failures == 0, f"{len(mixed)} states, {failures} mismatches")


def projection_check(x: Sequence[int], N_vec: Sequence[int], b: int, q) -> Check:
    """Colour-blind projection: pushing the labeled law forward through the species merge equals
    the law of the merged system, both truncated to particles at sites ``<= b``."""
    from .config import project

    qx = exact_q(q)
    labeled_law = finite_time_dist(x, (b,) * len(x), qx)
    pushed: dict[OccupancyConfig, ExpPoly] = {}
    for state, p in labeled_law.entries.items():
        key = project(OccupancyConfig.from_labeled(state), N_vec)
        pushed[key] = pushed.get(key, ExpPoly()) + p
    start = project(OccupancyConfig.from_labeled(x), N_vec)
    merged = forward_solve(start, qx, lambda s: all(site <= b for (site, _), _c in s.items))
    mismatches = sum(1 for key in set(pushed) | set(merged.entries) if pushed.get(key, ExpPoly()) != merged.entries.get(key, ExpPoly()))
    return Check(f"projection {tuple(N_vec)} from {tuple(x)}", mismatches == 0, f"{len(merged)} states, {mismatches} mismatches")
