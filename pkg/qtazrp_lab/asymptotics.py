"""Diffusive-scaling limit of joint q-moments.

With ``t = L`` and ``M_j = L + sigma_j sqrt(L)``, substituting ``w_j = -i u_j / sqrt(L)`` in the
small-contour q-moment integral gives, as ``L -> infinity``,

    q^(N(N-1)/2) (2 pi)^-N  \\int prod_j (i / u_j) B(u) exp(-i sigma_j u_j - u_j^2 / 2) du.

The ``u_j`` run along horizontal lines ``Im u_j = c_j`` with ``0 < c_1``, ``c_r < q c_(r+1)``,
the images of the small contours near the origin. The B factor has poles on the real axis, so
the lines cannot be moved there. Both the limit and its density are evaluated with the trapezoid
rule on the lines, which is spectrally accurate for these Gaussian-damped analytic integrands.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .contour import b_factor, diffusive_contours, qmoment_exponents, tensor_sum
from .errors import ConsistencyError, DomainError, ResourceError
from .qalg import check_q
from .settings import DEFAULTS

logger = logging.getLogger(__name__)

_TOP_LINE = 2.0
_LINE_RATIO = 0.6
_STEP_FACTOR = 0.227


@dataclass(frozen=True)
class ScalingQuery:
    sigma: tuple[float, ...]
    q: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", tuple(float(s) for s in self.sigma))
        if not self.sigma:
            raise DomainError("sigma must have at least one entry")
        if not all(math.isfinite(s) for s in self.sigma):
            raise DomainError(f"sigma entries must be finite, got {self.sigma}")
        check_q(self.q)
        if self.N > 4:
            raise ResourceError(f"limit integrals are limited to N <= 4, got N={self.N}")

    @property
    def N(self) -> int:
        return len(self.sigma)


def line_heights(N: int, q: float) -> tuple[float, ...]:
    """``c_r = (0.6 q)^(N-r) c_N``, so that ``c_r < q c_(r+1)``."""
    return tuple(_TOP_LINE * (_LINE_RATIO * q) ** (N - r) for r in range(1, N + 1))


def _step(heights: Sequence[float], q: float) -> float:
    gaps = [heights[0]]
    for i in range(len(heights)):
        for j in range(i + 1, len(heights)):
            gaps.append(q * heights[j] - heights[i])
            gaps.append(heights[j] - heights[i] / q)
    return _STEP_FACTOR * min(gaps)


def _line_integral(query: ScalingQuery, with_antiderivative: bool) -> complex:
    N, q = query.N, query.q
    heights = line_heights(N, q)
    h = _step(heights, q)
    U = max(DEFAULTS.limit_trunc, max(abs(s) for s in query.sigma) + DEFAULTS.limit_trunc)
    m = math.ceil(U / h)
    m += m % 2
    s = h * np.arange(-m, m + 1)
    points = [s + 1j * c for c in heights]
    weights = [np.full(s.shape, h, dtype=complex) for _ in heights]
    sigma = query.sigma

    def integrand(us):
        term = b_factor(us, q)
        for u, sig in zip(us, sigma):
            term = term * np.exp(-1j * sig * u - u * u / 2)
            if with_antiderivative:
                term = term * (1j / u)
        return term

    total, half = tensor_sum(integrand, points, weights)
    logger.debug("line integral N=%d step %.4f nodes %d: step-doubling difference %.2e", N, h, len(s), abs(total - half * 2**N))
    return total


def _real(value: complex, what: str) -> float:
    if abs(value.imag) > 1e-6:
        raise ConsistencyError(f"{what} has imaginary part {value.imag:.3e}")
    return float(value.real)


def limit_density(sigma: Sequence[float], q: float) -> float:
    """``q^(N(N-1)/2) (2 pi)^(-N/2) \\int B(u) prod exp(-i sigma_j u_j - u_j^2/2) du``.

    Normalised so that ``N = 1`` gives ``exp(-sigma^2 / 2)``.
    """
    query = ScalingQuery(tuple(sigma), q)
    N = query.N
    value = _line_integral(query, with_antiderivative=False) * q ** (N * (N - 1) // 2) / (2 * math.pi) ** (N / 2)
    return _real(value, "limit density")


def limit_qmoment(sigma: Sequence[float], q: float) -> float:
    """Diffusive limit of the joint q-moment; ``N = 1`` gives the standard normal cdf.

    Equals ``(2 pi)^(-N/2)`` times the integral of :func:`limit_density` over
    ``v_j <= sigma_j``, taken analytically through ``\\int_{-inf}^{sigma} e^(-i v u) dv = i e^(-i sigma u) / u``.
    """
    query = ScalingQuery(tuple(sigma), q)
    N = query.N
    value = _line_integral(query, with_antiderivative=True) * q ** (N * (N - 1) // 2) / (2 * math.pi) ** N
    return _real(value, "limit q-moment")


def scaled_bounds(sigma: Sequence[float], L: float) -> tuple[int, ...]:
    return tuple(math.floor(L + s * math.sqrt(L)) for s in sigma)


def finite_qmoment(sigma: Sequence[float], q: float, L: float, nodes: Optional[int] = None) -> float:
    """Finite-L q-moment at ``t = L``, ``M_j = floor(L + sigma_j sqrt(L))`` on diffusive contours."""
    query = ScalingQuery(tuple(sigma), q)
    M = scaled_bounds(query.sigma, L)
    if min(M) < 1:
        raise DomainError(f"L={L} is too small: bounds {M} must be positive")
    spec = diffusive_contours(query.N, q, L, nodes=nodes)
    return qmoment_exponents(M, float(L), q, spec)


@dataclass(frozen=True)
class ConvergencePoint:
    L: float
    finite: float
    limit: float

    @property
    def error(self) -> float:
        return abs(self.finite - self.limit)

    def to_json(self) -> dict:
        return {"L": self.L, "finite": self.finite, "limit": self.limit, "error": self.error}


def convergence_study(sigma: Sequence[float], q: float, Ls: Sequence[float] = (100, 400, 1600)) -> list[ConvergencePoint]:
    limit = limit_qmoment(sigma, q)
    points = []
    for L in Ls:
        points.append(ConvergencePoint(float(L), finite_qmoment(sigma, q, L), limit))
        logger.info("L=%s: finite %.8f limit %.8f", L, points[-1].finite, limit)
    return points
