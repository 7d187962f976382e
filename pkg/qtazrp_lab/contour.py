"""Numerical evaluation of the contour-integral formulas.

All integrals are computed with the trapezoid rule on circles, as a full tensor product over the
variables. On a circle ``w = c + rho e^(i theta)`` the normalised integral
``(2 pi i)^-1 \\oint f(w) dw`` is the mean of ``f(w) (w - c)`` over equally spaced nodes, which
converges geometrically for integrands analytic near the circle. The error estimate compares the
full grid with its every-other-node subgrid. Unless the caller fixes the node count, the grid is
doubled until the estimate drops below ``Defaults.quad_tol`` or ``Defaults.max_nodes`` is reached.

Integrands built from one factor per variable and one factor per pair of variables (the B factor
and everything multiplying it) are summed by contracting the pairwise factor matrices, which
costs ``O(n^3)`` for three variables instead of a pass over all ``n^3`` grid points.

Contour families
----------------
large
    Identical circles centred at the origin, radius above 1. They enclose the pole at 1 and every
    pole ``w_i = q w_j`` of the B factor.
small
    Real-centred circles ``C_1, ..., C_N`` with ``C_r`` containing 1 and ``q C_s`` for ``s > r``,
    but not 0, each passing at least ``POLE_CLEARANCE`` from 1. They are chosen by a grid search
    minimising the worst geometric convergence ratio and are certified before use. For small q the
    nesting squeezes ``C_1`` towards 0 and the best ratio approaches 1, which the node doubling
    absorbs.
mixed
    The first ``p`` variables on a large circle, the rest on a small family.
diffusive
    Small circles centred at 1 hugging the origin at distance of order ``L^(-1/2)``, used for
    finite-L q-moments in the diffusive scaling.
"""

import itertools
import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np

from .config import OrderedConfig, inversions, multiplicity_factor
from .errors import ConsistencyError, ContourError, CrossCheckError, DomainError, PoleError, ResourceError
from .qalg import c_coeff, check_q
from .settings import DEFAULTS

logger = logging.getLogger(__name__)

ContourKind = Literal["small", "large", "mixed", "diffusive"]
Integrand = Callable[[list], Union[np.ndarray, complex]]

_INNER_POINTS = 2**18
POLE_CLEARANCE = 0.1


@dataclass(frozen=True)
class ContourSpec:
    """Circles ``(center, radius)``, one per integration variable, in variable order."""

    circles: tuple[tuple[complex, float], ...]
    nodes: int = DEFAULTS.nodes
    kind: ContourKind = "small"
    n_large: int = 0

    def __post_init__(self) -> None:
        if self.nodes < 2 or self.nodes % 2:
            raise ContourError(f"nodes per circle must be even and >= 2, got {self.nodes}")

    @property
    def N(self) -> int:
        return len(self.circles)

    def with_nodes(self, nodes: int) -> "ContourSpec":
        return replace(self, nodes=nodes)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "nodes": self.nodes,
            "n_large": self.n_large,
            "circles": [{"center": [complex(c).real, complex(c).imag], "radius": r} for c, r in self.circles],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ContourSpec":
        circles = tuple((complex(*c["center"]), float(c["radius"])) for c in data["circles"])
        return cls(circles, int(data.get("nodes", DEFAULTS.nodes)), data.get("kind", "small"), int(data.get("n_large", 0)))


@dataclass(frozen=True)
class IntegralResult:
    value: complex
    est_error: float
    nodes: int = 0

    @property
    def real(self) -> float:
        return float(np.real(self.value))

    def scaled(self, factor: float) -> "IntegralResult":
        return IntegralResult(self.value * factor, self.est_error * abs(factor), self.nodes)

    def as_real(self, what: str = "integral") -> float:
        if abs(np.imag(self.value)) > 1e-8 * max(1.0, abs(self.real)):
            raise ConsistencyError(f"{what} has imaginary part {np.imag(self.value):.3e}")
        if self.est_error > DEFAULTS.quad_tol:
            logger.warning("%s: quadrature error estimate %.3e at %d nodes; consider more nodes", what, self.est_error, self.nodes)
        return self.real

    def as_probability(self, what: str = "probability") -> float:
        value = self.as_real(what)
        if not -1e-8 <= value <= 1 + 1e-8:
            raise ConsistencyError(f"{what} evaluated to {value!r}, outside [0, 1]")
        return value


# ---------------------------------------------------------------------------
# Algebraic factors
# ---------------------------------------------------------------------------


def b_factor(w: Sequence, q: float, pole_tol: Optional[float] = None):
    """``B(w) = prod_{i<j} (w_i - w_j) / (w_i - q w_j)``; accepts scalars or broadcastable arrays."""
    pole_tol = DEFAULTS.pole_tol if pole_tol is None else pole_tol
    result = 1.0 + 0j
    for i, j in itertools.combinations(range(len(w)), 2):
        den = w[i] - q * w[j]
        if np.min(np.abs(den)) <= pole_tol:
            raise PoleError(f"B factor is singular: w_{i + 1} = q w_{j + 1}")
        result = result * (w[i] - w[j]) / den
    return result


def s_factor(a, b, q: float, pole_tol: Optional[float] = None):
    """``S(a, b) = -(q b - a) / (q a - b)``."""
    pole_tol = DEFAULTS.pole_tol if pole_tol is None else pole_tol
    den = q * a - b
    if np.min(np.abs(den)) <= pole_tol:
        raise PoleError("S factor is singular: q a = b")
    return -(q * b - a) / den


def a_sigma(sigma: Sequence[int], w: Sequence, q: float, pole_tol: Optional[float] = None):
    """``A_sigma(w) = prod over i < j with sigma(i) > sigma(j) of S(w_sigma(j), w_sigma(i))``."""
    n = len(sigma)
    if sorted(sigma) != list(range(1, n + 1)):
        raise DomainError(f"{tuple(sigma)} is not a permutation of 1..{n}")
    result = 1.0 + 0j
    for i, j in itertools.combinations(range(n), 2):
        if sigma[i] > sigma[j]:
            result = result * s_factor(w[sigma[j] - 1], w[sigma[i] - 1], q, pole_tol)
    return result


def sort_permutation(x: Sequence[int]) -> tuple[int, ...]:
    """Fewest-inversion ``sigma`` with ``x_sigma(1) >= ... >= x_sigma(K)``."""
    return tuple(sorted(range(1, len(x) + 1), key=lambda i: (-x[i - 1], i)))


def _kernel(w, exponent: float, t: float):
    """``(1 - w)^(-exponent) exp(-w t)`` computed in the log domain."""
    return np.exp(-exponent * np.log(1 - w) - w * t)


# ---------------------------------------------------------------------------
# Contour families and certificates
# ---------------------------------------------------------------------------


def _small_margins(circles: Sequence[tuple[complex, float]], q: float) -> list[float]:
    margins = []
    for r, (c, rho) in enumerate(circles):
        margins.append(abs(c) - rho)
        margins.append(rho - abs(1 - c))
        for s in range(r + 1, len(circles)):
            cs, rs = circles[s]
            margins.append(rho - abs(c - q * cs) - q * rs)
    return margins


def _large_margins(circles: Sequence[tuple[complex, float]], q: float) -> list[float]:
    if any(abs(c) > 1e-12 for c, _ in circles):
        raise ContourError("large contours must be centred at the origin")
    margins = [rho - 1 for _, rho in circles]
    for i, j in itertools.combinations(range(len(circles)), 2):
        margins.append(circles[i][1] - q * circles[j][1])
    return margins


def certify(spec: ContourSpec, q: float, margin: Optional[float] = None) -> float:
    """Check the enclosure and nesting conditions of ``spec``; returns the smallest slack.

    Raises
    ------
    ContourError
        If any condition fails or holds with slack below ``margin``.
    """
    check_q(q)
    margin = DEFAULTS.contour_margin if margin is None else margin
    if spec.kind in ("small", "diffusive"):
        margins = _small_margins(spec.circles, q)
    elif spec.kind == "large":
        margins = _large_margins(spec.circles, q)
    elif spec.kind == "mixed":
        large, small = spec.circles[: spec.n_large], spec.circles[spec.n_large :]
        margins = _large_margins(large, q) + _small_margins(small, q)
        reach = max((abs(c) + rho for c, rho in small), default=0.0)
        margins += [rho - reach for _, rho in large]
    else:
        raise ContourError(f"unknown contour kind {spec.kind!r}")
    slack = min(margins) if margins else math.inf
    if slack < margin:
        raise ContourError(f"{spec.kind} contours fail their conditions at q={q}: slack {slack:.3e} < {margin:.1e}")
    logger.debug("certified %d %s circles at q=%s, slack %.3e", spec.N, spec.kind, q, slack)
    return slack


def _family(n: int, q: float, h: float, a: float, g: float) -> tuple[tuple[complex, float], ...]:
    right = 1 + h
    left = [a] * n
    for r in range(n - 2, -1, -1):
        left[r] = q * left[r + 1] / g
    return tuple((complex((lo + right) / 2), (right - lo) / 2) for lo in left)


def _worst_ratio(circles: Sequence[tuple[complex, float]], q: float) -> float:
    worst = 0.0
    for r, (c, rho) in enumerate(circles):
        ratios = [abs(1 - c) / rho, rho / abs(c)]
        for s in range(r + 1, len(circles)):
            cs, rs = circles[s]
            ratios.append((abs(q * cs - c) + q * rs) / rho)
        for i in range(r):
            ci, ri = circles[i]
            reach = ri / q - abs(ci / q - c)
            ratios.append(rho / reach if reach > 0 else math.inf)
        worst = max(worst, *ratios)
    return worst


@lru_cache(maxsize=64)
def _best_small_family(n: int, q: float, margin: float) -> tuple[tuple[complex, float], ...]:
    best, best_ratio = None, math.inf
    for h, a, g in itertools.product(np.linspace(0.1, 1.0, 19), np.linspace(0.5, 0.9, 21), np.linspace(1.05, 3.0, 40)):
        circles = _family(n, q, float(h), float(a), float(g))
        if min(_small_margins(circles, q)) < margin:
            continue
        if min(rho - abs(1 - c) for c, rho in circles) < POLE_CLEARANCE - 1e-12:
            continue
        ratio = _worst_ratio(circles, q)
        if ratio < best_ratio:
            best, best_ratio = circles, ratio
    if best is None:
        raise ContourError(f"no certified small contour family for n={n} at q={q}")
    logger.debug("small contours n=%d q=%s: worst convergence ratio %.3f", n, q, best_ratio)
    return best


def small_contours(n: int, q: float, nodes: Optional[int] = None) -> ContourSpec:
    check_q(q)
    circles = _best_small_family(n, float(q), DEFAULTS.contour_margin) if n else ()
    return ContourSpec(circles, nodes or DEFAULTS.nodes, "small")


def large_contours(n: int, q: float, radius: Optional[float] = None, nodes: Optional[int] = None) -> ContourSpec:
    check_q(q)
    radius = DEFAULTS.large_radius if radius is None else radius
    if radius <= 1:
        raise ContourError(f"large contours need radius > 1, got {radius}")
    return ContourSpec(((0j, float(radius)),) * n, nodes or DEFAULTS.nodes, "large")


def mixed_contours(p: int, n: int, q: float, radius: Optional[float] = None, nodes: Optional[int] = None) -> ContourSpec:
    """First ``p`` variables on one large circle, the remaining ``n - p`` on a small family."""
    if not 0 <= p <= n:
        raise DomainError(f"mixed contours need 0 <= p <= n, got p={p}, n={n}")
    small = small_contours(n - p, q).circles
    reach = max((abs(c) + rho for c, rho in small), default=0.0)
    radius = max(DEFAULTS.large_radius if radius is None else radius, reach + 0.5)
    return ContourSpec(((0j, float(radius)),) * p + small, nodes or DEFAULTS.nodes, "mixed", p)


def diffusive_contours(n: int, q: float, L: float, c: float = 1.5, nodes: Optional[int] = None) -> ContourSpec:
    """Circles centred at 1 passing at ``(q/2)^(n-r) c / sqrt(L)`` to the right of the origin."""
    check_q(q)
    if L <= 0:
        raise DomainError(f"L must be positive, got {L}")
    eps = c / math.sqrt(L)
    if eps >= 1:
        raise ContourError(f"L={L} is too small for diffusive contours with c={c}")
    circles = tuple((1 + 0j, 1 - (q / 2) ** (n - r) * eps) for r in range(1, n + 1))
    if nodes is None:
        nodes = max(512, 2 ** math.ceil(math.log2(48 * math.sqrt(L))))
    return ContourSpec(circles, nodes, "diffusive")


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def tensor_sum(integrand: Integrand, points: Sequence[np.ndarray], weights: Sequence[np.ndarray]) -> tuple[complex, complex]:
    """Weighted sum of ``integrand`` over the tensor grid of ``points``, and the same sum over the
    subgrid of even node indices (unscaled).

    The last few axes are evaluated as one vectorised block; the remaining axes are looped over.
    """
    N = len(points)
    n = len(points[0])
    k = max(1, min(N, int(math.log(_INNER_POINTS) / math.log(n))))
    outer = N - k
    inner_points = np.meshgrid(*points[outer:], indexing="ij", sparse=True)
    inner_weight = np.ones((n,) * k, dtype=complex)
    for axis, wts in enumerate(weights[outer:]):
        shape = [1] * k
        shape[axis] = n
        inner_weight = inner_weight * wts.reshape(shape)
    even = (slice(None, None, 2),) * k

    total = 0j
    half = 0j
    for idx in itertools.product(range(n), repeat=outer):
        ws = [points[r][i] for r, i in enumerate(idx)]
        wt = math.prod((weights[r][i] for r, i in enumerate(idx)), start=1 + 0j)
        vals = np.broadcast_to(integrand(ws + list(inner_points)), (n,) * k) * inner_weight
        total += wt * vals.sum()
        if all(i % 2 == 0 for i in idx):
            half += wt * vals[even].sum()
    return complex(total), complex(half)


def _b_pair(a, b, q: float, pole_tol: float):
    den = a - q * b
    if np.min(np.abs(den)) <= pole_tol:
        raise PoleError("B factor is singular: w_i = q w_j on the grid")
    return (a - b) / den


@dataclass(frozen=True)
class ProductIntegrand:
    """``prod_j f_j(w_j)`` times ``pair(w_i, w_j)`` over all ``i < j``.

    Every q-moment and I/J integrand has this shape with ``pair`` the B-factor term.
    """

    factors: tuple[Callable[[np.ndarray], np.ndarray], ...]
    pair: Callable[[np.ndarray, np.ndarray], np.ndarray]

    @classmethod
    def with_b_factor(cls, factors: Sequence[Callable], q: float, pole_tol: Optional[float] = None) -> "ProductIntegrand":
        pole_tol = DEFAULTS.pole_tol if pole_tol is None else pole_tol
        return cls(tuple(factors), lambda a, b: _b_pair(a, b, q, pole_tol))

    def __call__(self, ws: list):
        term = 1.0 + 0j
        for i, j in itertools.combinations(range(len(ws)), 2):
            term = term * self.pair(ws[i], ws[j])
        for f, w in zip(self.factors, ws):
            term = term * f(w)
        return term


def _contract(F: list[np.ndarray], G: dict[tuple[int, int], np.ndarray]) -> complex:
    if len(F) == 1:
        return complex(F[0].sum())
    if len(F) == 2:
        return complex(F[0] @ G[0, 1] @ F[1])
    # H[a, b] = sum_c G02[a, c] F2[c] G12[b, c]
    H = (G[0, 2] * F[2]) @ G[1, 2].T
    return complex(np.sum(F[0][:, None] * F[1][None, :] * G[0, 1] * H))


def product_sum(integrand: ProductIntegrand, points: Sequence[np.ndarray], weights: Sequence[np.ndarray]) -> tuple[complex, complex]:
    """The two sums of :func:`tensor_sum` for a product integrand.

    Up to three variables the pairwise factors are contracted as matrices; beyond that the
    integrand is evaluated point by point.
    """
    N = len(points)
    if N > 3:
        return tensor_sum(integrand, points, weights)
    F = [wt * np.broadcast_to(f(p), p.shape) for f, p, wt in zip(integrand.factors, points, weights)]
    G = {(i, j): integrand.pair(points[i][:, None], points[j][None, :]) for i, j in itertools.combinations(range(N), 2)}
    total = _contract(F, G)
    half = _contract([f[::2] for f in F], {ij: g[::2, ::2] for ij, g in G.items()})
    return total, half


def _grid(circles: Sequence[tuple[complex, float]], n: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    phases = np.exp(2j * np.pi * np.arange(n) / n)
    points = [c + rho * phases for c, rho in circles]
    weights = [rho * phases / n for _, rho in circles]
    return points, weights


def integrate(integrand: Union[Integrand, ProductIntegrand], spec: ContourSpec, max_nodes: Optional[int] = None, tol: Optional[float] = None) -> IntegralResult:
    """``(2 pi i)^-N`` times the N-fold contour integral of ``integrand`` over ``spec``.

    ``integrand`` receives a list of N broadcastable complex arrays, one per variable, or is a
    :class:`ProductIntegrand`. With ``max_nodes`` the node count starts at ``spec.nodes`` and is
    doubled while the error estimate exceeds ``tol`` and the doubled count fits.
    """
    tol = DEFAULTS.quad_tol if tol is None else tol
    N, n = spec.N, spec.nodes
    if N == 0:
        return IntegralResult(complex(integrand([])), 0.0, n)
    summer = product_sum if isinstance(integrand, ProductIntegrand) else tensor_sum
    while True:
        total, half = summer(integrand, *_grid(spec.circles, n))
        result = IntegralResult(total, float(abs(total - half * 2**N)), n)
        if result.est_error <= tol or max_nodes is None or 2 * n > max_nodes:
            return result
        logger.debug("%d-fold integral at %d nodes: error estimate %.2e, doubling", N, n, result.est_error)
        n *= 2


def _prepare(spec: Optional[ContourSpec], default: Callable[[], ContourSpec], N: int, q: float,
             kind: Optional[str] = None, nodes: Optional[int] = None) -> tuple[ContourSpec, Optional[int]]:
    """Certified spec plus the node ceiling for refinement; explicit specs and node counts are used as given."""
    if N > DEFAULTS.max_contour_n:
        raise ResourceError(f"{N}-fold contour integrals exceed the limit of {DEFAULTS.max_contour_n}")
    max_nodes = DEFAULTS.max_nodes if spec is None and nodes is None else None
    spec = default() if spec is None else spec
    if nodes is not None:
        spec = spec.with_nodes(nodes)
    if spec.N != N:
        raise ContourError(f"contour spec has {spec.N} circles, {N} needed")
    if kind is not None and spec.kind != kind:
        raise ContourError(f"{kind} contours required, got {spec.kind}")
    certify(spec, q)
    return spec, max_nodes


def _identical(spec: ContourSpec) -> None:
    if len(set(spec.circles)) > 1:
        raise ContourError("this integral needs every variable on the same circle")


# ---------------------------------------------------------------------------
# Transition probabilities and q-moments
# ---------------------------------------------------------------------------


def transition_prob_contour(x: OrderedConfig, t: float, q: float, spec: Optional[ContourSpec] = None,
                            symmetrize: bool = True, nodes: Optional[int] = None) -> float:
    """``P(X(t) = x)`` for all particles started at 0.

    ``x`` is the canonical ``(x, sigma)`` pair of the target. The value is
    ``q^inv(sigma) prod [N_j]! / prod [L_ij]!`` times the N-fold large-contour integral of
    ``(-1)^N B(w) prod (1 - w_j)^(-x_j - 1) e^(-w_j t)``. With ``symmetrize`` the integrand is
    averaged over relabelings of the variables, which leaves the value unchanged because all
    contours coincide.
    """
    check_q(q)
    N = x.N
    if t < 0:
        raise DomainError(f"negative time t={t}")
    spec, _ = _prepare(spec, lambda: large_contours(N, q), N, q, "large", nodes)
    _identical(spec)
    if N and x.x[-1] < 0:
        return 0.0
    exponents = [v + 1 for v in x.x]
    perms = list(itertools.permutations(range(N))) if symmetrize else [tuple(range(N))]

    def integrand(ws):
        acc = 0j
        for perm in perms:
            vs = [ws[p] for p in perm]
            term = b_factor(vs, q)
            for v, a in zip(vs, exponents):
                term = term * (1 - v) ** (-a)
            acc = acc + term
        return acc / len(perms) * np.exp(-sum(ws) * t)

    result = integrate(integrand, spec)
    scale = (-1) ** N * q ** x.inv * float(multiplicity_factor(x).evaluate(q))
    logger.debug("transition contour %s: est_error %.2e", x.x, result.est_error)
    return result.scaled(scale).as_probability("transition probability")


def qmoment_integral(M_w: Sequence[int], t: float, q: float, spec: Optional[ContourSpec] = None,
                     offset: Optional[int] = None, nodes: Optional[int] = None) -> IntegralResult:
    """``(-1)^N q^(N(N-1)/2)`` times the small-contour integral of
    ``B(w) prod (1 - w_j)^(-M_j + offset) e^(-w_j t) / w_j`` with exponents given in variable order."""
    check_q(q)
    N = len(M_w)
    offset = DEFAULTS.offset if offset is None else offset
    if N == 0:
        return IntegralResult(1.0 + 0j, 0.0)
    spec, max_nodes = _prepare(spec, lambda: small_contours(N, q), N, q, None, nodes)
    if spec.kind not in ("small", "diffusive"):
        raise ContourError(f"q-moment integrals need small contours, got {spec.kind}")
    factors = [lambda w, a=m - offset: _kernel(w, a, t) / w for m in M_w]
    result = integrate(ProductIntegrand.with_b_factor(factors, q), spec, max_nodes)
    logger.debug("q-moment %s at %d nodes: est_error %.2e", tuple(M_w), result.nodes, result.est_error)
    return result.scaled((-1) ** N * q ** (N * (N - 1) // 2))


def qmoment_exponents(M_w: Sequence[int], t: float, q: float, spec: Optional[ContourSpec] = None,
                      offset: Optional[int] = None, nodes: Optional[int] = None) -> float:
    return qmoment_integral(M_w, t, q, spec, offset, nodes).as_probability("q-moment")


def _interval_length(interval) -> int:
    if isinstance(interval, (int, np.integer)):
        return int(interval)
    y, x = interval
    return int(y) - int(x) + 1


def qmoment_contour(k: Sequence[int], intervals: Sequence, t: float, q: float, spec: Optional[ContourSpec] = None,
                    offset: Optional[int] = None, nodes: Optional[int] = None) -> float:
    """Joint q-moment with ``k_j`` species-j particles in the dual.

    ``intervals[m]`` is either the bound ``M_m`` itself or a pair ``(y_m, x_m)`` standing for the
    number of sites ``y_m - x_m + 1`` of ``[x_m, y_m]``. Bounds satisfy ``M_1 >= ... >= M_n >= 1``
    and species ``n + 1 - m`` is measured against ``M_m``, so in variable order the first
    ``k_n`` exponents are ``M_1``, the next ``k_(n-1)`` are ``M_2``, and so on.
    """
    n = len(k)
    if len(intervals) != n:
        raise DomainError(f"k and intervals differ in length: {n} vs {len(intervals)}")
    if any(v < 0 for v in k):
        raise DomainError(f"negative particle counts {tuple(k)}")
    M = [_interval_length(iv) for iv in intervals]
    if any(a < b for a, b in zip(M, M[1:])) or (M and M[-1] < 1):
        raise DomainError(f"bounds must satisfy M_1 >= ... >= M_n >= 1, got {tuple(M)}")
    M_w = [M[m] for m in range(n) for _ in range(k[n - 1 - m])]
    return qmoment_exponents(M_w, t, q, spec, offset, nodes)


def cdf_contour(x: Sequence[int], y: Sequence[int], t: float, q: float, spec: Optional[ContourSpec] = None,
                offset: Optional[int] = None, nodes: Optional[int] = None) -> float:
    """``P_x(X(t) <= y)`` through the q-moment formula.

    Needs every particle to start at the same site and the site counts ``y_j - x_j + 1`` to be
    weakly increasing in the species index.
    """
    if len(x) != len(y):
        raise DomainError(f"dimension mismatch: {len(x)} vs {len(y)}")
    if len(set(x)) > 1:
        raise DomainError(f"contour cdf needs equal starts, got {tuple(x)}")
    bounds = [b - a + 1 for a, b in zip(x, y)]
    if any(b < 1 for b in bounds):
        return 0.0
    if any(a > b for a, b in zip(bounds, bounds[1:])):
        raise DomainError(f"contour cdf needs y_j - x_j weakly increasing in j, got {tuple(b - 1 for b in bounds)}")
    n = len(x)
    return qmoment_contour((1,) * n, [bounds[n - 1 - m] for m in range(n)], t, q, spec, offset, nodes)


def calibrate_offset(q: float, t: float, candidates: Sequence[int] = (-1, 0, 1)) -> int:
    """Exponent offset of the q-moment integral that reproduces exact duality values."""
    from .exact import duality_qmoment

    instances = [((1,), (2,)), ((1,), (3,)), ((1, 1), (2, 1)), ((1, 1), (3, 1))]
    errors = {}
    for offset in candidates:
        err = 0.0
        for k, M in instances:
            try:
                value = qmoment_contour(k, M, t, q, offset=offset)
            except ConsistencyError:
                err = math.inf
                break
            err = max(err, abs(value - duality_qmoment(k, M, t, q)))
        errors[offset] = err
    best = min(errors, key=errors.get)
    logger.info("offset calibration at q=%s t=%s: %s", q, t, errors)
    if errors[best] > DEFAULTS.cross_tol:
        raise CrossCheckError(f"no offset in {tuple(candidates)} matches the duality values: {errors}")
    return best


# ---------------------------------------------------------------------------
# Large, small and mixed contour integrals with c-coefficients
# ---------------------------------------------------------------------------


def _check_family_args(K: int, L: int, M: Sequence[int], sigma: Optional[Sequence[int]], x: Sequence[int]) -> tuple[int, ...]:
    if len(x) != K:
        raise DomainError(f"x must have K={K} entries, got {len(x)}")
    if not 0 <= K <= L:
        raise DomainError(f"need 0 <= K <= L, got K={K}, L={L}")
    if len(M) < L - K:
        raise DomainError(f"need at least {L - K} bounds, got {len(M)}")
    if sigma is None:
        return sort_permutation(x)
    sigma = tuple(sigma)
    if sorted(sigma) != list(range(1, K + 1)):
        raise DomainError(f"{sigma} is not a permutation of 1..{K}")
    return sigma


def _family_integrand(L: int, K: int, M: Sequence[int], sigma: Sequence[int], x: Sequence[int], t: float, q: float) -> ProductIntegrand:
    free = L - K
    exponents = [M[j] + 1 for j in range(free)] + [x[sigma[j - free] - 1] + 1 for j in range(free, L)]
    factors = [lambda w, a=a: _kernel(w, a, t) / w for a in exponents[:free]]
    factors += [lambda w, a=a: _kernel(w, a, t) for a in exponents[free:]]
    return ProductIntegrand.with_b_factor(factors, q)


def contour_J(K: int, L: int, P: int, M: Sequence[int], sigma: Optional[Sequence[int]], x: Sequence[int], t: float, q: float,
              spec: Optional[ContourSpec] = None, nodes: Optional[int] = None) -> float:
    """Mixed integral: variables ``1..P`` on a large circle, ``P+1..L`` on small contours.

    The first ``L - K`` variables carry ``(1 - w_j)^(-M_j - 1) / w_j``; the last ``K`` carry
    ``(1 - w_j)^(-x_sigma - 1)``. No c-coefficient is applied.
    """
    check_q(q)
    sigma = _check_family_args(K, L, M, sigma, x)
    if not 0 <= P <= L:
        raise DomainError(f"need 0 <= P <= L, got P={P}, L={L}")
    spec, max_nodes = _prepare(spec, lambda: mixed_contours(P, L, q), L, q, None, nodes)
    if spec.kind != "mixed" or spec.n_large != P:
        raise ContourError(f"contour_J needs mixed contours with {P} large circles")
    result = integrate(_family_integrand(L, K, M, sigma, x, t, q), spec, max_nodes)
    return result.scaled(q ** inversions(sigma) * (-1) ** L).as_real("J integral")


def contour_I(N: int, L: int, K: int, M: Sequence[int], sigma: Optional[Sequence[int]], x: Sequence[int], t: float, q: float,
              spec: Optional[ContourSpec] = None, nodes: Optional[int] = None) -> float:
    """Large-contour integral with prefactor ``c(N, K, L - K) q^inv(sigma)``."""
    check_q(q)
    sigma = _check_family_args(K, L, M, sigma, x)
    if L > N:
        raise DomainError(f"need L <= N, got L={L}, N={N}")
    spec, max_nodes = _prepare(spec, lambda: large_contours(L, q), L, q, "large", nodes)
    result = integrate(_family_integrand(L, K, M, sigma, x, t, q), spec, max_nodes)
    scale = float(c_coeff(N, K, L - K).evaluate(q)) * q ** inversions(sigma) * (-1) ** L
    return result.scaled(scale).as_real("I integral")


def contour_I_tilde(N: int, K: int, M: Sequence[int], sigma: Optional[Sequence[int]], x: Sequence[int], t: float, q: float,
                    spec: Optional[ContourSpec] = None, nodes: Optional[int] = None) -> float:
    """Small-contour integral with prefactor ``q^(K + ... + N-1) q^inv(sigma)``.

    For one particle per species started at 0 this is
    ``P(z_1 = x_1, ..., z_K = x_K, z_(K+1) <= M_(N-K), ..., z_N <= M_1)``.
    """
    check_q(q)
    sigma = _check_family_args(K, N, M, sigma, x)
    spec, max_nodes = _prepare(spec, lambda: small_contours(N, q), N, q, "small", nodes)
    result = integrate(_family_integrand(N, K, M, sigma, x, t, q), spec, max_nodes)
    scale = q ** sum(range(K, N)) * q ** inversions(sigma) * (-1) ** N
    return result.scaled(scale).as_real("small-contour integral")


def antisymmetry_check(k: int, exponents: Sequence[int], t: float, q: float, spec: Optional[ContourSpec] = None,
                       nodes: Optional[int] = None) -> float:
    """``|integral|`` of ``B(w) (q / w_k - 1 / w_(k+1)) prod (1 - w_j)^(-a_j - 1) e^(-w_j t)``.

    With ``a_k = a_(k+1)`` and identical contours the integrand is antisymmetric in
    ``w_k, w_(k+1)``, so the value vanishes.
    """
    check_q(q)
    N = len(exponents)
    if not 1 <= k < N:
        raise DomainError(f"need 1 <= k < N, got k={k}, N={N}")
    if exponents[k - 1] != exponents[k]:
        raise DomainError(f"exponents {k} and {k + 1} must be equal, got {exponents[k - 1]} and {exponents[k]}")
    spec, _ = _prepare(spec, lambda: large_contours(N, q), N, q, "large", nodes)
    _identical(spec)

    def integrand(ws):
        term = b_factor(ws, q) * (q / ws[k - 1] - 1 / ws[k])
        for w, a in zip(ws, exponents):
            term = term * _kernel(w, a + 1, t)
        return term

    return abs(integrate(integrand, spec).value)
