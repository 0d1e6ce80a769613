"""Exact scalars: rationals, Laurent polynomials in pi^2 and numeric evaluation.

Rationals are ``gmpy2.mpq``. Every quantity of interest lives in
Q[pi^2, pi^-2], so a :class:`PiLaurent` stores exponents in units of pi^2.
The odd powers of pi that show up (sqrt(pi) in Gamma at half integers) are
carried by flags and only ever leave this module numerically.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Mapping, NamedTuple, Union

import gmpy2
import mpmath
from gmpy2 import mpq

from .errors import DomainError

__all__ = [
    "DEFAULT_PRECISION",
    "Rational",
    "as_rational",
    "PiLaurent",
    "HighPrecisionReal",
    "TrigPair",
    "HalfGamma",
    "bernoulli",
    "zeta_even",
    "a_coeff",
    "alpha",
    "pl_arith",
    "eval_real",
    "log_eval",
    "gamma_half",
    "s_sum",
    "s_sum_exact",
    "w_sum",
    "hyperbolic_w_sum",
    "B0",
    "double_factorial",
]

DEFAULT_PRECISION = 256
MIN_PRECISION = 64

Rational = type(mpq())
RationalLike = Union[int, "Rational", str]


def as_rational(x) -> Rational:
    if isinstance(x, Rational):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a rational")
    try:
        return mpq(x)
    except (TypeError, ValueError) as exc:
        raise TypeError(f"cannot interpret {x!r} as a rational") from exc


def double_factorial(n: int) -> int:
    """n!! with the convention (-1)!! = 0!! = 1."""
    return int(gmpy2.double_fac(n)) if n > 0 else 1


# ---------------------------------------------------------------------------
# PiLaurent


class PiLaurent:
    """Finite sum of q_e * pi^(2e) with rational q_e and integer e.

    Immutable and hashable. Zero coefficients are never stored, so equality is
    plain term-by-term comparison.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[int, RationalLike] | None = None):
        clean = {}
        for e, q in (terms or {}).items():
            if not isinstance(e, int) or isinstance(e, bool):
                raise TypeError("exponents must be integers")
            q = as_rational(q)
            if q:
                clean[e] = q
        self._terms = tuple(sorted(clean.items()))
        self._hash = None

    @classmethod
    def _from_sorted(cls, items):
        obj = cls.__new__(cls)
        obj._terms = tuple(items)
        obj._hash = None
        return obj

    @classmethod
    def monomial(cls, q: RationalLike, e: int = 0) -> "PiLaurent":
        q = as_rational(q)
        return cls._from_sorted(((e, q),) if q else ())

    @classmethod
    def coerce(cls, x) -> "PiLaurent":
        return x if isinstance(x, PiLaurent) else cls.monomial(x, 0)

    # -- inspection -------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def exponents(self) -> tuple:
        return tuple(e for e, _ in self._terms)

    def coeff(self, e: int) -> Rational:
        for k, q in self._terms:
            if k == e:
                return q
        return mpq(0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def as_monomial(self) -> tuple:
        """Return (q, e) for a single-term value."""
        if len(self._terms) != 1:
            raise DomainError(f"{self} is not a monomial")
        e, q = self._terms[0]
        return q, e

    def __bool__(self):
        return bool(self._terms)

    def __len__(self):
        return len(self._terms)

    # -- ring operations --------------------------------------------------
    def __add__(self, other):
        try:
            other = PiLaurent.coerce(other)
        except TypeError:
            return NotImplemented
        acc = dict(self._terms)
        for e, q in other._terms:
            acc[e] = acc.get(e, 0) + q
        return PiLaurent._from_sorted(sorted((e, q) for e, q in acc.items() if q))

    __radd__ = __add__

    def __neg__(self):
        return PiLaurent._from_sorted((e, -q) for e, q in self._terms)

    def __sub__(self, other):
        try:
            other = PiLaurent.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return PiLaurent.coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, PiLaurent):
            acc = {}
            for e1, q1 in self._terms:
                for e2, q2 in other._terms:
                    acc[e1 + e2] = acc.get(e1 + e2, 0) + q1 * q2
            return PiLaurent._from_sorted(sorted((e, q) for e, q in acc.items() if q))
        try:
            c = as_rational(other)
        except TypeError:
            return NotImplemented
        if not c:
            return PiLaurent()
        return PiLaurent._from_sorted((e, q * c) for e, q in self._terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        """Division by a rational or by a monomial (the only exact inverses)."""
        if isinstance(other, PiLaurent):
            q, e = other.as_monomial()
            return PiLaurent._from_sorted((k - e, c / q) for k, c in self._terms)
        c = as_rational(other)
        if not c:
            raise ZeroDivisionError("division of PiLaurent by zero")
        return PiLaurent._from_sorted((e, q / c) for e, q in self._terms)

    def __rtruediv__(self, other):
        return PiLaurent.coerce(other) / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            q, e = self.as_monomial()
            return PiLaurent.monomial(q**k, e * k)
        out = PiLaurent.monomial(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def shift(self, de: int) -> "PiLaurent":
        """Multiply by pi^(2*de)."""
        return PiLaurent._from_sorted((e + de, q) for e, q in self._terms)

    # -- comparisons / hashing -------------------------------------------
    def __eq__(self, other):
        if isinstance(other, PiLaurent):
            return self._terms == other._terms
        try:
            return self._terms == PiLaurent.coerce(other)._terms
        except TypeError:
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(tuple((e, q.numerator, q.denominator) for e, q in self._terms))
        return self._hash

    # -- text form ----------------------------------------------------------
    def to_text(self) -> str:
        if not self._terms:
            return "0:0/1"
        return ";".join(f"{e}:{q.numerator}/{q.denominator}" for e, q in self._terms)

    @classmethod
    def from_text(cls, text: str) -> "PiLaurent":
        text = text.strip()
        if not text:
            raise ValueError("empty PiLaurent text")
        if text == "0:0/1":
            return cls()
        terms = []
        last = None
        for part in text.split(";"):
            try:
                e_s, frac = part.split(":")
                num_s, den_s = frac.split("/")
                e, num, den = int(e_s), int(num_s), int(den_s)
            except ValueError as exc:
                raise ValueError(f"malformed PiLaurent term {part!r}") from exc
            if den <= 0 or num == 0 or gmpy2.gcd(num, den) != 1:
                raise ValueError(f"non-canonical rational in term {part!r}")
            if last is not None and e <= last:
                raise ValueError("exponents must be strictly increasing")
            last = e
            terms.append((e, mpq(num, den)))
        return cls._from_sorted(terms)

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, q in self._terms:
            if e == 0:
                parts.append(str(q))
            else:
                parts.append(f"{q}*pi^{2 * e}")
        return " + ".join(parts)

    def __repr__(self):
        return f"PiLaurent({self.to_text()!r})"


def pl_arith(op: str, lhs: PiLaurent, rhs=None) -> PiLaurent:
    """Dispatch form of the ring operations: add, sub, mul, negate, scalar_mul."""
    if op == "add":
        return lhs + rhs
    if op == "sub":
        return lhs - rhs
    if op == "mul":
        return lhs * PiLaurent.coerce(rhs)
    if op == "negate":
        return -lhs
    if op == "scalar_mul":
        return lhs * as_rational(rhs)
    raise ValueError(f"unknown operation {op!r}")


# ---------------------------------------------------------------------------
# numerics


def _check_precision(bits: int) -> int:
    if not isinstance(bits, int) or bits < MIN_PRECISION:
        raise DomainError(f"precision_bits must be an integer >= {MIN_PRECISION}")
    return bits


@dataclass(frozen=True)
class HighPrecisionReal:
    """An mpmath real tagged with the precision it was computed at.

    Binary operations run at the larger of the two precisions, so combining
    values never silently loses bits.
    """

    value: mpmath.mpf
    precision_bits: int = DEFAULT_PRECISION

    def __post_init__(self):
        _check_precision(self.precision_bits)
        if not isinstance(self.value, mpmath.mpf):
            with mpmath.workprec(self.precision_bits):
                object.__setattr__(self, "value", mpmath.mpf(self.value))

    @classmethod
    def of(cls, x, precision_bits: int = DEFAULT_PRECISION) -> "HighPrecisionReal":
        if isinstance(x, HighPrecisionReal):
            return x
        with mpmath.workprec(precision_bits):
            if isinstance(x, Rational):
                v = mpmath.mpf(int(x.numerator)) / int(x.denominator)
            else:
                v = mpmath.mpf(x)
        return cls(v, precision_bits)

    def _binary(self, other, fn):
        if isinstance(other, HighPrecisionReal):
            prec = max(self.precision_bits, other.precision_bits)
            ov = other.value
        else:
            prec = self.precision_bits
            ov = HighPrecisionReal.of(other, prec).value
        with mpmath.workprec(prec):
            return HighPrecisionReal(fn(self.value, ov), prec)

    def __add__(self, o):
        return self._binary(o, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, o):
        return self._binary(o, lambda a, b: a - b)

    def __rsub__(self, o):
        return self._binary(o, lambda a, b: b - a)

    def __mul__(self, o):
        return self._binary(o, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return self._binary(o, lambda a, b: a / b)

    def __rtruediv__(self, o):
        return self._binary(o, lambda a, b: b / a)

    def __neg__(self):
        return HighPrecisionReal(-self.value, self.precision_bits)

    def __abs__(self):
        return HighPrecisionReal(abs(self.value), self.precision_bits)

    def __pow__(self, k):
        with mpmath.workprec(self.precision_bits):
            return HighPrecisionReal(self.value**k, self.precision_bits)

    def _cmp_value(self, o):
        return o.value if isinstance(o, HighPrecisionReal) else HighPrecisionReal.of(o, self.precision_bits).value

    def __lt__(self, o):
        return self.value < self._cmp_value(o)

    def __le__(self, o):
        return self.value <= self._cmp_value(o)

    def __gt__(self, o):
        return self.value > self._cmp_value(o)

    def __ge__(self, o):
        return self.value >= self._cmp_value(o)

    def __float__(self):
        return float(self.value)

    def exp(self):
        with mpmath.workprec(self.precision_bits):
            return HighPrecisionReal(mpmath.exp(self.value), self.precision_bits)

    def log(self):
        with mpmath.workprec(self.precision_bits):
            return HighPrecisionReal(mpmath.log(self.value), self.precision_bits)

    def sqrt(self):
        with mpmath.workprec(self.precision_bits):
            return HighPrecisionReal(mpmath.sqrt(self.value), self.precision_bits)

    def to_decimal(self, digits: int | None = None) -> str:
        if digits is None:
            digits = max(15, int(self.precision_bits * 0.30103) - 2)
        with mpmath.workprec(self.precision_bits):
            return mpmath.nstr(self.value, digits)

    def __repr__(self):
        return f"HighPrecisionReal({self.to_decimal(20)}, bits={self.precision_bits})"


def _mpf_rational(q: Rational) -> mpmath.mpf:
    return mpmath.mpf(int(q.numerator)) / int(q.denominator)


def eval_real(p, precision_bits: int = DEFAULT_PRECISION) -> HighPrecisionReal:
    """Numeric value of a PiLaurent (or rational)."""
    _check_precision(precision_bits)
    p = PiLaurent.coerce(p)
    # guard bits cover cancellation between terms of different sign
    guard = 32 + 4 * len(p)
    with mpmath.workprec(precision_bits + guard):
        pi2 = mpmath.pi**2
        total = mpmath.mpf(0)
        for e, q in p._terms:
            total += _mpf_rational(q) * pi2**e
    with mpmath.workprec(precision_bits):
        return HighPrecisionReal(+total, precision_bits)


def log_eval(p, precision_bits: int = DEFAULT_PRECISION) -> HighPrecisionReal:
    """ln of a positive monomial q*pi^(2e), without forming the number itself."""
    _check_precision(precision_bits)
    p = PiLaurent.coerce(p)
    if not p.is_monomial():
        raise DomainError("log_eval needs a single-term PiLaurent")
    q, e = p.as_monomial()
    if q <= 0:
        raise DomainError("log_eval needs a positive coefficient")
    with mpmath.workprec(precision_bits + 32):
        v = mpmath.log(int(q.numerator)) - mpmath.log(int(q.denominator)) + 2 * e * mpmath.log(mpmath.pi)
    with mpmath.workprec(precision_bits):
        return HighPrecisionReal(+v, precision_bits)


# ---------------------------------------------------------------------------
# Bernoulli, zeta, the a_i sequence


def bernoulli(m: int) -> Rational:
    """B_m for even m >= 0 (B_2 = 1/6)."""
    if not isinstance(m, int) or m < 0 or m % 2:
        raise DomainError("bernoulli is defined here for even m >= 0")
    return _bernoulli(m)


@lru_cache(maxsize=None)
def _bernoulli(m: int) -> Rational:
    p, q = mpmath.bernfrac(m)
    return mpq(int(p), int(q))


def zeta_even(m: int) -> PiLaurent:
    """zeta(m) = (-1)^(m/2+1) B_m (2 pi)^m / (2 m!) as a monomial in pi^2."""
    if not isinstance(m, int) or m < 2 or m % 2:
        raise DomainError("zeta_even needs an even m >= 2")
    k = m // 2
    q = (-1) ** (k + 1) * bernoulli(m) * mpq(2**m, 2 * factorial(m))
    return PiLaurent.monomial(q, k)


@lru_cache(maxsize=None)
def alpha(i: int) -> Rational:
    """Rational part of a_i, i.e. a_i / pi^(2i); alpha(-1) = 0."""
    if i < -1:
        raise DomainError("a_i is defined for i >= -1")
    if i == -1:
        return mpq(0)
    if i == 0:
        return mpq(1, 2)
    z, _ = zeta_even(2 * i).as_monomial()
    return z * (1 - mpq(2) ** (1 - 2 * i))


def a_coeff(i: int) -> PiLaurent:
    """a_{-1} = 0, a_0 = 1/2, a_i = zeta(2i)(1 - 2^(1-2i))."""
    return PiLaurent.monomial(alpha(i), max(i, 0))


class HalfGamma(NamedTuple):
    """Gamma(m + 1/2) = rational * sqrt(pi)."""

    rational: Rational
    sqrt_pi: bool = True

    def evaluate(self, precision_bits: int = DEFAULT_PRECISION) -> HighPrecisionReal:
        with mpmath.workprec(precision_bits + 16):
            v = _mpf_rational(self.rational) * mpmath.sqrt(mpmath.pi)
        return HighPrecisionReal.of(v, precision_bits)


def gamma_half(m: int) -> HalfGamma:
    """Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)."""
    if not isinstance(m, int) or m < 0:
        raise DomainError("gamma_half needs m >= 0")
    return HalfGamma(mpq(factorial(2 * m), 4**m * factorial(m)))


# ---------------------------------------------------------------------------
# the sums over the a_i


def s_sum_exact(j: int) -> Rational:
    """Exact values of the weighted a_i sums for j <= 1.

    j = 0 follows the telescoping form sum_{i>=0}(a_i - a_{i-1}) = 1,
    j = 1 is sum_i i(a_{i+1} - a_i) = 1/4.
    """
    if j == 0:
        return mpq(1)
    if j == 1:
        return mpq(1, 4)
    raise DomainError("exact values are only available for j <= 1")


def s_sum(j: int, precision_bits: int = DEFAULT_PRECISION) -> HighPrecisionReal:
    """sum_{i>=0} i^j (a_{i+1} - a_i), numerically for j >= 2.

    Uses a_i = eta(2i) and the bound 0 < a_{i+1} - a_i <= (3/4) 4^-i, so the
    tail after the cut-off is certified below 2^-(precision_bits + 8).
    """
    _check_precision(precision_bits)
    if not isinstance(j, int) or j < 0:
        raise DomainError("j must be a nonnegative integer")
    if j <= 1:
        return HighPrecisionReal.of(s_sum_exact(j), precision_bits)
    work = precision_bits + 32
    with mpmath.workprec(work):
        target = mpmath.mpf(2) ** -(precision_bits + 8)
        total = mpmath.mpf(0)
        prev = mpmath.mpf(1) / 2  # a_0
        i = 0
        while True:
            cur = mpmath.altzeta(2 * (i + 1))
            total += mpmath.mpf(i) ** j * (cur - prev)
            prev = cur
            i += 1
            # once (1+1/i)^j <= 2 the tail is at most twice its first term
            if (1 + mpmath.mpf(1) / i) ** j <= 2:
                tail = 2 * mpmath.mpf(i) ** j * mpmath.mpf(3) / 4 * mpmath.mpf(4) ** -i
                if tail < target:
                    break
    with mpmath.workprec(precision_bits):
        return HighPrecisionReal(+total, precision_bits)


class TrigPair:
    """P(x) cos x + Q(x) sin x with Laurent polynomials P, Q over Q."""

    __slots__ = ("P", "Q")

    def __init__(self, P: Mapping[int, RationalLike], Q: Mapping[int, RationalLike]):
        self.P = {e: as_rational(c) for e, c in P.items() if c}
        self.Q = {e: as_rational(c) for e, c in Q.items() if c}

    @classmethod
    def base(cls) -> "TrigPair":
        """sin x / x - cos x."""
        return cls({0: -1}, {-1: 1})

    def euler(self) -> "TrigPair":
        """Apply x d/dx: (P cos + Q sin) -> x(P' + Q) cos + x(Q' - P) sin."""
        P, Q = {}, {}
        for e, c in self.P.items():
            P[e] = P.get(e, 0) + e * c  # x P'
            Q[e + 1] = Q.get(e + 1, 0) - c  # -x P
        for e, c in self.Q.items():
            Q[e] = Q.get(e, 0) + e * c  # x Q'
            P[e + 1] = P.get(e + 1, 0) + c  # x Q
        return TrigPair(P, Q)

    def half_euler(self) -> "TrigPair":
        t = self.euler()
        return TrigPair({e: c / 2 for e, c in t.P.items()}, {e: c / 2 for e, c in t.Q.items()})

    def at_pi(self) -> PiLaurent:
        """Value at x = pi, where sin vanishes and cos = -1."""
        terms = {}
        for e, c in self.P.items():
            if e % 2:
                raise DomainError("odd power of pi in TrigPair evaluation")
            terms[e // 2] = terms.get(e // 2, 0) - c
        return PiLaurent(terms)

    def __eq__(self, other):
        return isinstance(other, TrigPair) and self.P == other.P and self.Q == other.Q

    def __repr__(self):
        return f"TrigPair(P={self.P}, Q={self.Q})"


def w_sum(j: int) -> PiLaurent:
    """sum_{L>=1} (-1)^(L-1) 2 L^j pi^(2L) / (2L+1)!, exactly."""
    if not isinstance(j, int) or j < 0:
        raise DomainError("j must be a nonnegative integer")
    if j == 0:
        # 2(1 - sin x / x) at x = pi
        return PiLaurent.monomial(2)
    t = TrigPair.base()
    for _ in range(j - 1):
        t = t.half_euler()
    return t.at_pi()


#: lower ratio bound pi^2/3 - pi^4/30
B0 = PiLaurent({1: mpq(1, 3), 2: mpq(-1, 30)})


def hyperbolic_w_sum(precision_bits: int = DEFAULT_PRECISION) -> HighPrecisionReal:
    """sum_{L>=1} 2 L pi^(2L) / (2L+1)! = cosh(pi) - sinh(pi)/pi."""
    _check_precision(precision_bits)
    with mpmath.workprec(precision_bits + 16):
        v = mpmath.cosh(mpmath.pi) - mpmath.sinh(mpmath.pi) / mpmath.pi
    return HighPrecisionReal.of(v, precision_bits)

