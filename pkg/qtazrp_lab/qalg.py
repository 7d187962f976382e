"""Exact q-deformed arithmetic.

Polynomials in the formal parameter ``q`` are stored densely, lowest power first, with
arbitrary-precision integer (or rational) coefficients. Rational functions are kept in a
canonical form (coprime, no integer content, positive leading denominator coefficient) so
that equality is structural.
"""

import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence, Union

import sympy

from .errors import ConsistencyError, DomainError, PoleError

Coeff = Union[int, Fraction]
QValue = Union[float, Fraction]

_Q = sympy.Symbol("q")


def _normalize(c: Coeff) -> Coeff:
    if isinstance(c, Fraction) and c.denominator == 1:
        return c.numerator
    return c


@dataclass(frozen=True)
class QPolynomial:
    """Polynomial in q with exact coefficients ``coeffs[k]`` of ``q**k``."""

    coeffs: tuple[Coeff, ...] = ()

    def __post_init__(self) -> None:
        coeffs = [_normalize(c) for c in self.coeffs]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coeffs", tuple(coeffs))

    @classmethod
    def monomial(cls, k: int, c: Coeff = 1) -> "QPolynomial":
        return cls((0,) * k + (c,))

    @classmethod
    def constant(cls, c: Coeff) -> "QPolynomial":
        return cls((c,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> Coeff:
        return self.coeffs[-1] if self.coeffs else 0

    def evaluate(self, q):
        """Horner evaluation; works for int, Fraction, float and complex q."""
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * q + c
        return acc

    __call__ = evaluate

    def __add__(self, other) -> "QPolynomial":
        other = _as_poly(other)
        if other is NotImplemented:
            return NotImplemented
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return QPolynomial(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self) -> "QPolynomial":
        return QPolynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other) -> "QPolynomial":
        other = _as_poly(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "QPolynomial":
        return (-self) + other

    def __mul__(self, other) -> "QPolynomial":
        other = _as_poly(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero or other.is_zero:
            return ZERO
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return QPolynomial(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "QPolynomial":
        if k < 0:
            raise DomainError(f"negative power {k} of a polynomial")
        result = ONE
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def divmod(self, divisor: "QPolynomial") -> tuple["QPolynomial", "QPolynomial"]:
        """Long division; quotient and remainder have rational coefficients in general."""
        if divisor.is_zero:
            raise DomainError("polynomial division by zero")
        rem = [Fraction(c) for c in self.coeffs]
        quot = [Fraction(0)] * max(len(rem) - divisor.degree, 0)
        lead = Fraction(divisor.leading)
        for i in range(len(quot) - 1, -1, -1):
            c = rem[i + divisor.degree] / lead
            quot[i] = c
            if c:
                for j, d in enumerate(divisor.coeffs):
                    rem[i + j] -= c * d
        return QPolynomial(tuple(quot)), QPolynomial(tuple(rem))

    def __str__(self) -> str:
        return _poly_text(self.coeffs)


ZERO = QPolynomial()
ONE = QPolynomial((1,))


def _as_poly(x) -> "QPolynomial":
    if isinstance(x, QPolynomial):
        return x
    if isinstance(x, (int, Fraction)):
        return QPolynomial((x,))
    return NotImplemented


def _term(c: Coeff, k: int) -> str:
    if k == 0:
        return str(c)
    power = "q" if k == 1 else f"q^{k}"
    return f"{c}*{power}"


def _poly_text(coeffs: Sequence[Coeff]) -> str:
    parts: list[str] = []
    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        if not parts:
            parts.append(_term(c, k))
        elif c < 0:
            parts.append(f" - {_term(-c, k)}")
        else:
            parts.append(f" + {_term(c, k)}")
    return "".join(parts) or "0"


def _to_sympy(p: QPolynomial) -> sympy.Poly:
    return sympy.Poly(list(reversed(p.coeffs)) or [0], _Q, domain=sympy.ZZ)


def _from_sympy(p: sympy.Poly) -> QPolynomial:
    return QPolynomial(tuple(int(c) for c in reversed(p.all_coeffs())))


def _integral(p: QPolynomial, scale: int) -> QPolynomial:
    return QPolynomial(tuple(int(c * scale) for c in p.coeffs))


@dataclass(frozen=True)
class QRationalFunction:
    """Ratio of integer polynomials in q, always stored in canonical form."""

    numerator: QPolynomial
    denominator: QPolynomial = ONE

    def __post_init__(self) -> None:
        num, den = self.numerator, self.denominator
        if den.is_zero:
            raise DomainError("rational function with zero denominator")
        if num.is_zero:
            num, den = ZERO, ONE
        elif den.degree == 0 and not any(isinstance(c, Fraction) for c in num.coeffs + den.coeffs):
            content = math.gcd(*num.coeffs, den.leading)
            if den.leading < 0:
                content = -content
            num = QPolynomial(tuple(c // content for c in num.coeffs))
            den = QPolynomial((den.leading // content,))
        else:
            denominators = [c.denominator for c in num.coeffs + den.coeffs if isinstance(c, Fraction)]
            scale = reduce(math.lcm, denominators, 1)
            snum, sden = _to_sympy(_integral(num, scale)), _to_sympy(_integral(den, scale))
            g = snum.gcd(sden)
            snum, sden = snum.exquo(g), sden.exquo(g)
            num, den = _from_sympy(snum), _from_sympy(sden)
            content = math.gcd(*num.coeffs, *den.coeffs)
            if den.leading < 0:
                content = -content
            num = QPolynomial(tuple(c // content for c in num.coeffs))
            den = QPolynomial(tuple(c // content for c in den.coeffs))
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    def evaluate(self, q, pole_tol: float = 1e-12):
        den = self.denominator.evaluate(q)
        if isinstance(den, (int, Fraction)):
            if den == 0:
                raise PoleError(f"{self} has a pole at q={q}")
        else:
            scale = max((abs(c) * abs(q) ** k for k, c in enumerate(self.denominator.coeffs)), default=1.0)
            if abs(den) <= pole_tol * scale:
                raise PoleError(f"{self} is numerically singular at q={q}")
        return self.numerator.evaluate(q) / den

    __call__ = evaluate

    def __add__(self, other) -> "QRationalFunction":
        other = _as_rf(other)
        if other is NotImplemented:
            return NotImplemented
        return QRationalFunction(
            self.numerator * other.denominator + other.numerator * self.denominator,
            self.denominator * other.denominator,
        )

    __radd__ = __add__

    def __neg__(self) -> "QRationalFunction":
        return QRationalFunction(-self.numerator, self.denominator)

    def __sub__(self, other) -> "QRationalFunction":
        other = _as_rf(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "QRationalFunction":
        return (-self) + other

    def __mul__(self, other) -> "QRationalFunction":
        other = _as_rf(other)
        if other is NotImplemented:
            return NotImplemented
        return QRationalFunction(self.numerator * other.numerator, self.denominator * other.denominator)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "QRationalFunction":
        other = _as_rf(other)
        if other is NotImplemented:
            return NotImplemented
        if other.numerator.is_zero:
            raise DomainError("division by the zero rational function")
        return QRationalFunction(self.numerator * other.denominator, self.denominator * other.numerator)

    def __rtruediv__(self, other) -> "QRationalFunction":
        other = _as_rf(other)
        if other is NotImplemented:
            return NotImplemented
        return other / self

    def __pow__(self, k: int) -> "QRationalFunction":
        if k < 0:
            return QRationalFunction(self.denominator, self.numerator) ** (-k)
        return QRationalFunction(self.numerator**k, self.denominator**k)

    def __str__(self) -> str:
        return f"({self.numerator})/({self.denominator})"


def _as_rf(x) -> "QRationalFunction":
    if isinstance(x, QRationalFunction):
        return x
    if isinstance(x, QPolynomial):
        return QRationalFunction(x)
    if isinstance(x, (int, Fraction)):
        return QRationalFunction(QPolynomial((x,)))
    return NotImplemented


Q = QRationalFunction(QPolynomial((0, 1)))


def check_q(q: QValue) -> QValue:
    """Validate 0 < q < 1 and return q unchanged."""
    if not 0 < q < 1:
        raise DomainError(f"q must satisfy 0 < q < 1, got {q}")
    return q


def q_int(k: int) -> QPolynomial:
    """[k]_q = 1 + q + ... + q^(k-1); [0]_q is the zero polynomial."""
    if k < 0:
        raise DomainError(f"q-integer of negative k={k}")
    return QPolynomial((1,) * k)


def q_factorial(k: int) -> QPolynomial:
    if k < 0:
        raise DomainError(f"q-factorial of negative k={k}")
    return reduce(lambda acc, j: acc * q_int(j), range(1, k + 1), ONE)


def q_multinomial(m: Iterable[int]) -> QPolynomial:
    """[N]_q! / prod [m_i]_q! with N = sum(m); the division is checked to be exact."""
    m = list(m)
    if any(k < 0 for k in m):
        raise DomainError(f"q-multinomial of negative block sizes {m}")
    result = q_factorial(sum(m))
    for k in m:
        result, rem = result.divmod(q_factorial(k))
        if not rem.is_zero or any(isinstance(c, Fraction) for c in result.coeffs):
            raise ConsistencyError(f"q-multinomial {m} is not an integer polynomial")
    return result


def q_binomial(n: int, k: int) -> QPolynomial:
    if not 0 <= k <= n:
        return ZERO
    return q_multinomial((k, n - k))


def q_pochhammer(alpha, k: int) -> QRationalFunction:
    """(alpha; q)_k = prod_{j<k} (1 - q^j alpha)."""
    if k < 0:
        raise DomainError(f"q-Pochhammer of negative length k={k}")
    alpha = _as_rf(alpha)
    if alpha is NotImplemented:
        raise DomainError(f"unsupported Pochhammer argument {alpha!r}")
    result = _as_rf(1)
    for j in range(k):
        result = result * (1 - QPolynomial.monomial(j) * alpha)
    return result


def c_coeff(N: int, K: int, m: int) -> QPolynomial:
    """Sum over K <= i_1 < ... < i_m <= N-1 of q^(i_1 + ... + i_m)."""
    if not 0 <= m <= N - K:
        raise DomainError(f"c-coefficient needs 0 <= m <= N-K, got N={N}, K={K}, m={m}")
    counts: dict[int, int] = {}
    for combo in itertools.combinations(range(K, N), m):
        s = sum(combo)
        counts[s] = counts.get(s, 0) + 1
    top = max(counts)
    return QPolynomial(tuple(counts.get(k, 0) for k in range(top + 1)))


def rf_add(f, g) -> QRationalFunction:
    return _as_rf(f) + _as_rf(g)


def rf_sub(f, g) -> QRationalFunction:
    return _as_rf(f) - _as_rf(g)


def rf_mul(f, g) -> QRationalFunction:
    return _as_rf(f) * _as_rf(g)


def rf_div(f, g) -> QRationalFunction:
    return _as_rf(f) / _as_rf(g)


def rf_pow(f, k: int) -> QRationalFunction:
    return _as_rf(f) ** k


def rf_eval(f, q: QValue, pole_tol: float = 1e-12):
    return _as_rf(f).evaluate(q, pole_tol=pole_tol)


def rf_eq(f, g) -> bool:
    return _as_rf(f) == _as_rf(g)


_TERM = re.compile(r"([+-]?)\s*(\d+)(?:\*q(?:\^(\d+))?)?")


def _parse_poly(text: str) -> QPolynomial:
    text = text.strip()
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1]
    coeffs: dict[int, int] = {}
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TERM.match(text, pos)
        if m is None or m.end() == pos:
            raise DomainError(f"cannot parse polynomial text {text!r} at offset {pos}")
        sign, c, k = m.groups()
        power = 0 if m.group(0).find("q") < 0 else int(k or 1)
        value = -int(c) if sign == "-" else int(c)
        coeffs[power] = coeffs.get(power, 0) + value
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    if not coeffs:
        return ZERO
    return QPolynomial(tuple(coeffs.get(k, 0) for k in range(max(coeffs) + 1)))


def rf_from_text(text: str) -> QRationalFunction:
    """Parse the canonical text form ``"(c0 + c1*q + ...)/(d0 + ...)"``."""
    head, sep, tail = text.partition(")/(")
    if not sep:
        return QRationalFunction(_parse_poly(text))
    return QRationalFunction(_parse_poly(head + ")"), _parse_poly("(" + tail))
