"""Large-genus expansions: truncated 1/g series, extrapolation, closed forms.

Expansions have the shape c_0 + c_1/g + ... + c_s/g^s.  Coefficients are
either all exact (:class:`PiLaurent`) or all numeric (:class:`HighPrecisionReal`);
the two never mix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Callable, Mapping, Sequence

import mpmath
import numpy as np
from gmpy2 import mpq
from sklearn.base import BaseEstimator, RegressorMixin

from .errors import DomainError
from .exact import (
    DEFAULT_PRECISION,
    HighPrecisionReal,
    PiLaurent,
    Rational,
    _check_precision,
    alpha,
    eval_real,
)
from .intersection import _lookup, canonical_key, d0_of, reserve_genus, recursion_terms
from .volumes import ratio_gm1, ratio_np1, ratio_tau, volume, zograf_ratio

__all__ = [
    "EXACT",
    "NUMERIC",
    "TruncatedExpansion",
    "exp_mul",
    "exp_reciprocal",
    "exp_product_family",
    "compose_ratio_expansion",
    "WindowFit",
    "ExtrapolationReport",
    "vandermonde_extrapolate",
    "partial_product_extrapolate",
    "InverseGenusRegressor",
    "CoefficientFormulas",
    "e1_formula",
    "h1_formula",
    "b1_formula",
    "c1_formula",
    "format_closed_form",
    "FirstOrderReport",
    "verify_first_order",
    "DecompositionParts",
    "difference_decomposition",
    "lexicographic_sum",
    "ContributionCase",
    "CONTRIBUTION_CASES",
    "ContributionReport",
    "first_order_contributions",
]

EXACT = "exact"
NUMERIC = "numeric"

_EXACT_TYPES = (int, Rational, Fraction, PiLaurent)


def _is_exact(x) -> bool:
    return isinstance(x, _EXACT_TYPES) and not isinstance(x, bool)


def _to_exact(x) -> PiLaurent:
    if isinstance(x, Fraction):
        x = mpq(x.numerator, x.denominator)
    return PiLaurent.coerce(x)


# ---------------------------------------------------------------------------
# truncated series


class TruncatedExpansion:
    """c_0 + c_1/g + ... + c_s/g^s with a fixed truncation order s."""

    __slots__ = ("_coeffs", "_mode")

    def __init__(self, coeffs: Sequence, mode: str | None = None, precision_bits: int = DEFAULT_PRECISION):
        coeffs = list(coeffs)
        if not coeffs:
            raise ValueError("an expansion needs at least c_0")
        if mode is None:
            if all(_is_exact(c) for c in coeffs):
                mode = EXACT
            elif all(isinstance(c, HighPrecisionReal) for c in coeffs):
                mode = NUMERIC
            else:
                raise TypeError("coefficients mix exact and numeric values")
        if mode == EXACT:
            if not all(_is_exact(c) for c in coeffs):
                raise TypeError("exact expansions accept only rationals and PiLaurent values")
            coeffs = [_to_exact(c) for c in coeffs]
        elif mode == NUMERIC:
            if any(isinstance(c, PiLaurent) for c in coeffs):
                raise TypeError("numeric expansions do not accept PiLaurent coefficients")
            coeffs = [HighPrecisionReal.of(c, precision_bits) for c in coeffs]
        else:
            raise ValueError(f"unknown mode {mode!r}")
        self._coeffs = tuple(coeffs)
        self._mode = mode

    @classmethod
    def one(cls, order: int, mode: str = EXACT, precision_bits: int = DEFAULT_PRECISION):
        return cls([1] + [0] * order, mode, precision_bits)

    @classmethod
    def geometric(cls, c, order: int, mode: str = EXACT, precision_bits: int = DEFAULT_PRECISION):
        """1 / (1 - c/g) = sum_m c^m / g^m."""
        if mode == EXACT:
            c = _to_exact(c)
            terms, p = [], PiLaurent.monomial(1)
            for _ in range(order + 1):
                terms.append(p)
                p = p * c
        else:
            c = HighPrecisionReal.of(c, precision_bits)
            terms = [c**m for m in range(order + 1)]
        return cls(terms, mode, precision_bits)

    @property
    def order(self) -> int:
        return len(self._coeffs) - 1

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def coefficients(self) -> tuple:
        return self._coeffs

    @property
    def precision_bits(self) -> int | None:
        if self._mode == EXACT:
            return None
        return min(c.precision_bits for c in self._coeffs)

    def __getitem__(self, i):
        return self._coeffs[i]

    def __len__(self):
        return len(self._coeffs)

    def _zero(self):
        if self._mode == EXACT:
            return PiLaurent()
        return HighPrecisionReal.of(0, self.precision_bits)

    def _check(self, other: "TruncatedExpansion"):
        if not isinstance(other, TruncatedExpansion):
            raise TypeError("expected a TruncatedExpansion")
        if other._mode != self._mode:
            raise TypeError(f"cannot combine {self._mode} and {other._mode} expansions")
        if other.order != self.order:
            raise ValueError(f"order mismatch: {self.order} vs {other.order}")

    def __add__(self, other):
        self._check(other)
        return TruncatedExpansion([a + b for a, b in zip(self._coeffs, other._coeffs)], self._mode)

    def __sub__(self, other):
        self._check(other)
        return TruncatedExpansion([a - b for a, b in zip(self._coeffs, other._coeffs)], self._mode)

    def __neg__(self):
        return TruncatedExpansion([-a for a in self._coeffs], self._mode)

    def __mul__(self, other):
        if isinstance(other, TruncatedExpansion):
            return exp_mul(self, other)
        if self._mode == EXACT:
            if not _is_exact(other):
                raise TypeError("exact expansions scale only by exact values")
            other = _to_exact(other)
        elif isinstance(other, PiLaurent):
            raise TypeError("numeric expansions do not scale by PiLaurent values")
        return TruncatedExpansion([a * other for a in self._coeffs], self._mode)

    __rmul__ = __mul__

    def truncate(self, order: int) -> "TruncatedExpansion":
        if order > self.order:
            raise ValueError(f"cannot raise order {self.order} to {order}")
        return TruncatedExpansion(self._coeffs[: order + 1], self._mode)

    def shift(self, h: int) -> "TruncatedExpansion":
        """Re-expand f(g - h) in powers of 1/g, keeping the same order."""
        s = self.order
        out = [self._zero() for _ in range(s + 1)]
        for i, c in enumerate(self._coeffs):
            if i == 0:
                out[0] = out[0] + c
                continue
            # 1/(g-h)^i = sum_m C(i+m-1, m) h^m / g^(i+m)
            for m in range(s - i + 1):
                w = comb(i + m - 1, m) * h**m
                if w:
                    out[i + m] = out[i + m] + c * w
        return TruncatedExpansion(out, self._mode)

    def evaluate(self, g, precision_bits: int = DEFAULT_PRECISION):
        """Sum of c_i / g^i; exact when the expansion and g are exact."""
        if self._mode == EXACT and _is_exact(g):
            x = _to_exact(g)
            q, e = x.as_monomial()
            if e != 0 or q == 0:
                raise DomainError("g must be a nonzero rational")
            inv = mpq(1) / q
            return sum((c * inv**i for i, c in enumerate(self._coeffs)), PiLaurent())
        x = HighPrecisionReal.of(g, precision_bits)
        total = HighPrecisionReal.of(0, precision_bits)
        for i, c in enumerate(self._coeffs):
            c = eval_real(c, precision_bits) if isinstance(c, PiLaurent) else c
            total = total + c / x**i
        return total

    def __eq__(self, other):
        return (
            isinstance(other, TruncatedExpansion)
            and self._mode == other._mode
            and self._coeffs == other._coeffs
        )

    def __hash__(self):
        return hash((self._mode, self._coeffs))

    def __repr__(self):
        return f"TruncatedExpansion({list(self._coeffs)!r}, mode={self._mode!r})"


def exp_mul(a: TruncatedExpansion, b: TruncatedExpansion) -> TruncatedExpansion:
    a._check(b)
    s = a.order
    out = [a._zero() for _ in range(s + 1)]
    for i, x in enumerate(a.coefficients):
        for j in range(s - i + 1):
            out[i + j] = out[i + j] + x * b.coefficients[j]
    return TruncatedExpansion(out, a.mode)


def exp_reciprocal(a: TruncatedExpansion) -> TruncatedExpansion:
    c0 = a.coefficients[0]
    if a.mode == EXACT:
        if c0.is_zero():
            raise ZeroDivisionError("leading coefficient is zero")
        if not c0.is_monomial():
            raise DomainError("exact reciprocal needs a single-term leading coefficient")
        inv0 = PiLaurent.monomial(1) / c0
    else:
        if c0.value == 0:
            raise ZeroDivisionError("leading coefficient is zero")
        inv0 = 1 / c0
    v = [inv0]
    for k in range(1, a.order + 1):
        acc = a._zero()
        for i in range(1, k + 1):
            acc = acc + a.coefficients[i] * v[k - i]
        v.append(-(acc * inv0))
    return TruncatedExpansion(v, a.mode)


def exp_product_family(factors: Sequence[TruncatedExpansion]) -> TruncatedExpansion:
    factors = list(factors)
    if not factors:
        raise ValueError("empty product has no order")
    out = factors[0]
    for f in factors[1:]:
        out = exp_mul(out, f)
    return out


def compose_ratio_expansion(
    g_shift: int,
    n_shift: int,
    n: int,
    s: int,
    np1: Callable[[int], TruncatedExpansion] | Mapping[int, TruncatedExpansion],
    gm1: Callable[[int], TruncatedExpansion] | Mapping[int, TruncatedExpansion],
) -> TruncatedExpansion:
    """Expansion of (8 pi^2 g)^N V_{g-g',n-n'} / V_{g,n} with N = 2g' + n'.

    ``np1(k)`` must expand 4 pi^2 (2h-2+k) V_{h,k} / V_{h,k+1} in 1/h and
    ``gm1(k)`` must expand V_{h-1,k+2} / V_{h,k} in 1/h; both are re-centred
    to 1/g here.  The ratio is written as a product of N factors of the first
    kind, g' factors of the second, and N reciprocals of the linear factors
    4 pi^2 (2g - 2g' + n + j - 3); multiplying by (8 pi^2 g)^N leaves each of
    those as 1/(1 - c_j/(2g)).
    """
    if g_shift < 0:
        raise DomainError("g' must be nonnegative")
    count = 2 * g_shift + n_shift
    if count < 0:
        raise DomainError("need 2g' + n' >= 0")
    if n - n_shift < 0:
        raise DomainError("n - n' must be nonnegative")
    get_np1 = np1 if callable(np1) else np1.__getitem__
    get_gm1 = gm1 if callable(gm1) else gm1.__getitem__

    factors = []
    mode = None
    for j in range(-n_shift + 1, 2 * g_shift + 1):
        e = get_np1(n + j - 1)
        mode = mode or e.mode
        factors.append(("np1", e, g_shift))
    for j in range(1, g_shift + 1):
        e = get_gm1(n + 2 * j - 2)
        mode = mode or e.mode
        factors.append(("gm1", e, j - 1))
    if not factors:
        return TruncatedExpansion.one(s, mode or EXACT)

    prec = None
    out = None
    for kind, e, h in factors:
        if e.order < s:
            raise ValueError(f"source {kind} expansion has order {e.order} < {s}")
        term = e.truncate(s).shift(h)
        prec = prec or e.precision_bits or DEFAULT_PRECISION
        out = term if out is None else exp_mul(out, term)
    for j in range(-n_shift + 1, 2 * g_shift + 1):
        c = 2 * g_shift - n - j + 3
        c = mpq(c, 2) if out.mode == EXACT else HighPrecisionReal.of(mpq(c, 2), prec)
        out = exp_mul(out, TruncatedExpansion.geometric(c, s, out.mode, prec))
    return out


# ---------------------------------------------------------------------------
# extrapolation


@dataclass(frozen=True)
class WindowFit:
    g_values: tuple
    coefficients: tuple
    flagged: bool = False  # numerically ill-conditioned at the working precision
    condition: float | None = None


@dataclass(frozen=True)
class ExtrapolationReport:
    """Coefficient fits over sliding windows of s+1 consecutive samples.

    ``coefficients`` is the fit on the last window; ``spreads[i]`` is the
    max - min of coefficient i over the last three windows.
    """

    order: int
    coefficients: tuple
    windows: tuple
    spreads: tuple
    g_range: tuple
    precision_bits: int | None  # None when the samples were exact

    @property
    def exact(self) -> bool:
        return self.precision_bits is None

    def spread(self, i: int = 0) -> HighPrecisionReal:
        return self.spreads[i]

    @property
    def flagged(self) -> bool:
        return any(w.flagged for w in self.windows)

    def numeric(self, i: int, precision_bits: int = DEFAULT_PRECISION) -> HighPrecisionReal:
        c = self.coefficients[i]
        return eval_real(c, precision_bits) if isinstance(c, PiLaurent) else c

    def to_dict(self, digits: int = 20) -> dict:
        bits = self.precision_bits or DEFAULT_PRECISION
        return {
            "order": self.order,
            "g_range": list(self.g_range),
            "precision_bits": self.precision_bits,
            "fitted": [self.numeric(i, bits).to_decimal(digits) for i in range(self.order + 1)],
            "spreads": [s.to_decimal(6) for s in self.spreads],
            "windows": [
                {
                    "g": list(w.g_values),
                    "fitted": [
                        (eval_real(c, bits) if isinstance(c, PiLaurent) else c).to_decimal(digits)
                        for c in w.coefficients
                    ],
                    "flagged": w.flagged,
                }
                for w in self.windows
            ],
        }


def _solve_exact(gs, ys):
    """Gaussian elimination over Q; right-hand sides may be PiLaurent."""
    m = len(gs)
    rows = [[mpq(1, g) ** i for i in range(m)] for g in gs]
    rhs = [_to_exact(y) for y in ys]
    for col in range(m):
        piv = next(r for r in range(col, m) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = 1 / rows[col][col]
        rows[col] = [x * inv for x in rows[col]]
        rhs[col] = rhs[col] * inv
        for r in range(m):
            if r != col and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[col])]
                rhs[r] = rhs[r] - rhs[col] * f
    return tuple(rhs)


def _solve_numeric(gs, ys, prec):
    with mpmath.workprec(prec):
        V = mpmath.matrix([[mpmath.mpf(1) / g**i for i in range(len(gs))] for g in gs])
        y = mpmath.matrix([y.value for y in ys])
        try:
            inv = mpmath.inverse(V)
        except ZeroDivisionError:
            # singular at this precision: solve with twice the bits, keep the flag
            with mpmath.workprec(2 * prec):
                inv = mpmath.inverse(V)
                c = inv * y
                cond = mpmath.mnorm(V, 1) * mpmath.mnorm(inv, 1)
            coeffs = tuple(HighPrecisionReal(+c[i], prec) for i in range(len(gs)))
            return coeffs, True, float(cond)
        c = inv * y
        cond = mpmath.mnorm(V, 1) * mpmath.mnorm(inv, 1)
        # forward error is bounded by cond * unit roundoff; flag once fewer than
        # 32 bits of the working precision survive
        flagged = bool(mpmath.log(cond, 2) > prec - 32)
        coeffs = tuple(HighPrecisionReal(+c[i], prec) for i in range(len(gs)))
    return coeffs, flagged, float(cond)


def vandermonde_extrapolate(samples, s: int, precision_bits: int = DEFAULT_PRECISION) -> ExtrapolationReport:
    """Fit f(g) = sum_{i<=s} c_i / g^i on every window of s+1 consecutive samples.

    Exact samples (integers, rationals, PiLaurent) are solved exactly over Q,
    so a true polynomial in 1/g comes back exactly with zero spread.  Numeric
    samples are solved at ``precision_bits``.
    """
    if not isinstance(s, int) or s < 0:
        raise ValueError("order s must be a nonnegative integer")
    samples = sorted(((int(g), y) for g, y in samples), key=lambda t: t[0])
    gs = [g for g, _ in samples]
    if len(set(gs)) != len(gs):
        raise ValueError("duplicate g values in samples")
    if len(gs) < s + 1:
        raise DomainError(f"need at least {s + 1} samples for order {s}, got {len(gs)}")
    if any(g <= 0 for g in gs):
        raise DomainError("sample g values must be positive")
    exact = all(_is_exact(y) for _, y in samples)
    if not exact:
        _check_precision(precision_bits)
        ys_all = [
            y if isinstance(y, HighPrecisionReal) else HighPrecisionReal.of(y, precision_bits)
            for _, y in samples
        ]
    windows = []
    for start in range(len(gs) - s):
        wg = gs[start : start + s + 1]
        if exact:
            coeffs = _solve_exact(wg, [y for _, y in samples[start : start + s + 1]])
            windows.append(WindowFit(tuple(wg), coeffs))
        else:
            coeffs, flagged, cond = _solve_numeric(wg, ys_all[start : start + s + 1], precision_bits)
            windows.append(WindowFit(tuple(wg), coeffs, flagged, cond))
    last = windows[-3:]
    bits = DEFAULT_PRECISION if exact else precision_bits
    spreads = []
    for i in range(s + 1):
        vals = [w.coefficients[i] for w in last]
        if exact and all(v == vals[0] for v in vals):
            spreads.append(HighPrecisionReal.of(0, bits))
            continue
        nums = [eval_real(v, bits) if isinstance(v, PiLaurent) else v for v in vals]
        spreads.append(max(nums, key=lambda x: x.value) - min(nums, key=lambda x: x.value))
    return ExtrapolationReport(
        order=s,
        coefficients=windows[-1].coefficients,
        windows=tuple(windows),
        spreads=tuple(spreads),
        g_range=(gs[0], gs[-1]),
        precision_bits=None if exact else precision_bits,
    )


def partial_product_extrapolate(
    c: Callable[[int], HighPrecisionReal], g_range: tuple, s: int, precision_bits: int = DEFAULT_PRECISION
) -> tuple:
    """Numeric form of the infinite-product expansion.

    Fits P(g) = prod_{j<=g} c_j ~ C_0 (1 + b_1/g + ...).  Returns
    ``(C_0, (b_1, ..., b_s), report)``.
    """
    lo, hi = g_range
    prod = HighPrecisionReal.of(1, precision_bits)
    samples = []
    for j in range(1, hi + 1):
        prod = prod * c(j)
        if j >= lo:
            samples.append((j, prod))
    rep = vandermonde_extrapolate(samples, s, precision_bits)
    c0 = rep.coefficients[0]
    return c0, tuple(x / c0 for x in rep.coefficients[1:]), rep


class InverseGenusRegressor(RegressorMixin, BaseEstimator):
    """Estimator facade over :func:`vandermonde_extrapolate`.

    ``fit(X, y)`` takes genera (shape (m,) or (m, 1)) and sample values;
    ``predict`` evaluates the last-window fit as a float polynomial in 1/g.
    """

    def __init__(self, order: int = 3, precision_bits: int = DEFAULT_PRECISION):
        self.order = order
        self.precision_bits = precision_bits

    def fit(self, X, y):
        g = np.asarray(X).reshape(-1)
        vals = list(y)
        if len(g) != len(vals):
            raise ValueError("X and y have different lengths")
        samples = [
            (int(gi), v if (_is_exact(v) or isinstance(v, HighPrecisionReal)) else HighPrecisionReal.of(float(v), self.precision_bits))
            for gi, v in zip(g, vals)
        ]
        self.report_ = vandermonde_extrapolate(samples, self.order, self.precision_bits)
        self.coef_ = np.array([float(self.report_.numeric(i)) for i in range(self.order + 1)])
        self.spread_ = np.array([float(x) for x in self.report_.spreads])
        return self

    def predict(self, X):
        g = np.asarray(X, dtype=float).reshape(-1)
        return sum(c / g**i for i, c in enumerate(self.coef_))


# ---------------------------------------------------------------------------
# closed forms


def _check_n(n):
    if not isinstance(n, int) or n < 0:
        raise DomainError("n must be a nonnegative integer")


def e1_formula(n: int, d: Sequence[int]) -> PiLaurent:
    """First-order coefficient of [tau_d]_g / V_{g,n}; s counts the zero entries of d."""
    d = tuple(d)
    if len(d) != n or n < 1 or min(d) < 0:
        raise DomainError(f"d must hold {n} nonnegative entries")
    D = sum(d)
    if D == 0:
        raise DomainError("e1 needs |d| >= 1")
    s = d.count(0)
    val = mpq(D * D) + (n - mpq(5, 2)) * D - mpq((n - s) * (s + n - 5), 4)
    return PiLaurent.monomial(-val, -1)


def h1_formula(n: int) -> PiLaurent:
    """(4n + pi^2 - 8) / (4 pi^2)."""
    _check_n(n)
    return PiLaurent({0: mpq(1, 4), -1: mpq(n - 2)})


def b1_formula(n: int) -> PiLaurent:
    """-(2n - 3) / pi^2."""
    _check_n(n)
    return PiLaurent.monomial(-(2 * n - 3), -1)


def c1_formula(n: int) -> PiLaurent:
    """-n^2/(2 pi^2) - (1/4 - 5/(2 pi^2)) n + 7/12 - 17/(6 pi^2)."""
    _check_n(n)
    return PiLaurent(
        {0: mpq(7, 12) - mpq(n, 4), -1: -mpq(n * n, 2) + mpq(5 * n, 2) - mpq(17, 6)}
    )


class CoefficientFormulas:
    e1 = staticmethod(e1_formula)
    h1 = staticmethod(h1_formula)
    b1 = staticmethod(b1_formula)
    c1 = staticmethod(c1_formula)


_SUP = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")
_MINUS = "−"


def _pi_power(e: int) -> str:
    return "π" + str(2 * abs(e)).translate(_SUP)


def _term_text(q, e) -> str:
    num, den = abs(int(q.numerator)), int(q.denominator)
    if e == 0:
        return f"{num}/{den}" if den != 1 else f"{num}"
    p = _pi_power(e)
    if e > 0:
        core = (f"{num}" if num != 1 else "") + p
        return core if den == 1 else f"{core}/{den}"
    return f"{num}/{p}" if den == 1 else f"{num}/({den}{p})"


def format_closed_form(v: PiLaurent) -> str:
    """Readable rendering, e.g. −1/(2π²) or 1/4 − 2/π²."""
    items = sorted(v.terms.items(), key=lambda t: -t[0])
    if not items:
        return "0"
    out = ""
    for i, (e, q) in enumerate(items):
        text = _term_text(q, e)
        if i == 0:
            out = (_MINUS if q < 0 else "") + text
        else:
            out += f" {_MINUS if q < 0 else '+'} {text}"
    return out


# ---------------------------------------------------------------------------
# first-order verification


_TARGETS = ("e1", "h1", "b1", "c1", "zograf")


@dataclass(frozen=True)
class FirstOrderReport:
    target: str
    n: int
    d: tuple | None
    g_range: tuple
    order: int
    fit: ExtrapolationReport
    estimate: HighPrecisionReal
    closed_form: str
    closed_value: HighPrecisionReal
    relative_deviation: float
    spread: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.relative_deviation <= self.tolerance

    @property
    def fitted(self) -> tuple:
        return tuple(self.fit.numeric(i, self.fit.precision_bits or DEFAULT_PRECISION) for i in range(self.order + 1))

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "n": self.n,
            "d": list(self.d) if self.d is not None else None,
            "g_range": list(self.g_range),
            "order": self.order,
            "fitted": [c.to_decimal(20) for c in self.fitted],
            "estimate": self.estimate.to_decimal(20),
            "closed_form": self.closed_form,
            "closed_value": self.closed_value.to_decimal(20),
            "relative_deviation": float(f"{self.relative_deviation:.6e}"),
            "spread": float(f"{self.spread:.6e}"),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "precision_bits": self.fit.precision_bits,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def _default_tolerance(target: str, g_hi: int) -> float:
    if target == "c1":
        return 0.10
    if target == "zograf":
        return 0.01
    return 0.05 if g_hi <= 20 else 0.01


def _samples(target, n, d, gs, prec):
    out = []
    for g in gs:
        if target == "e1":
            v = ratio_tau(g, d)
        elif target == "h1":
            v = ratio_np1(g, n)
        elif target == "b1":
            v = ratio_gm1(g, n)
        else:
            out.append((g, zograf_ratio(g, n, prec)))
            continue
        out.append((g, eval_real(v, prec)))
    return out


def verify_first_order(
    target: str,
    n: int,
    d: Sequence[int] | None = None,
    g_range: tuple = (12, 20),
    s: int = 3,
    precision_bits: int = DEFAULT_PRECISION,
    tolerance: float | None = None,
) -> FirstOrderReport:
    """Fit exact ratio data over ``g_range`` and compare with the closed form.

    e1, h1, b1 compare the fitted 1/g coefficient of the ratio family itself.
    c1 compares c_1/c_0 of the normalized volume sequence, which does not
    presuppose the value of its limit; ``zograf`` compares c_0 with 1/sqrt(pi).
    """
    if target not in _TARGETS:
        raise DomainError(f"unknown target {target!r}; choose from {', '.join(_TARGETS)}")
    _check_precision(precision_bits)
    _check_n(n)
    lo, hi = g_range
    if hi - lo < s:
        raise DomainError(f"g-range {lo}:{hi} has fewer than {s + 1} points")
    if lo < 2:
        raise DomainError("g-range must start at g >= 2")
    if target == "e1":
        if d is None:
            raise DomainError("e1 needs an index vector d")
        d = tuple(d)
        closed = e1_formula(n, d)
        canonical_key(hi, d)
    else:
        d = None
        if target == "zograf" and n < 1 and lo < 2:
            raise DomainError("zograf needs stable (g, n)")
        closed = {"h1": h1_formula, "b1": b1_formula, "c1": c1_formula}.get(target, lambda n: None)(n)

    reserve_genus(hi + 1)
    rep = vandermonde_extrapolate(_samples(target, n, d, range(lo, hi + 1), precision_bits), s, precision_bits)
    if target == "zograf":
        with mpmath.workprec(precision_bits):
            cval = HighPrecisionReal(1 / mpmath.sqrt(mpmath.pi), precision_bits)
        cform = "1/√π"
        estimate = rep.coefficients[0]
        spread = float(rep.spreads[0])
    elif target == "c1":
        cval = eval_real(closed, precision_bits)
        cform = format_closed_form(closed)
        ratios = [w.coefficients[1] / w.coefficients[0] for w in rep.windows]
        estimate = ratios[-1]
        last = [float(r) for r in ratios[-3:]]
        spread = max(last) - min(last)
    else:
        cval = eval_real(closed, precision_bits)
        cform = format_closed_form(closed)
        estimate = rep.coefficients[1]
        spread = float(rep.spreads[1])
    dev = abs(float((estimate - cval) / cval))
    tol = tolerance if tolerance is not None else _default_tolerance(target, hi)
    return FirstOrderReport(target, n, d, (lo, hi), s, rep, estimate, cform, cval, dev, spread, tol)


# ---------------------------------------------------------------------------
# the increment decomposition


@dataclass(frozen=True)
class DecompositionParts:
    V1: PiLaurent
    V2: PiLaurent
    V3: PiLaurent

    @property
    def total(self) -> PiLaurent:
        return self.V1 + self.V2 + self.V3


def difference_decomposition(g: int, k: Sequence[int]) -> DecompositionParts:
    """([tau_k] - [tau_{k + e_1}]) / V_{g,n} split into the three recursion summands.

    The first entry of ``k`` is the one incremented.  Both brackets share the
    per-L terms of the recursion for ``k``; only the weights shift, from a_L
    to a_L - a_{L-1}.
    """
    k = tuple(k)
    canonical_key(g, k)
    n = len(k)
    if (g, n) in ((0, 3), (1, 1)):
        raise DomainError(f"(g, n) = ({g}, {n}) is a base case of the recursion")
    A, B, C = recursion_terms(g, k, _lookup)
    D = d0_of(g, k)
    V = volume(g, n)

    def part(series):
        hi = sum((alpha(L) * x for L, x in enumerate(series) if x), mpq(0))
        lo = sum((alpha(L - 1) * x for L, x in enumerate(series) if x), mpq(0))
        return PiLaurent({D: hi, D - 1: -lo}) / V

    a_tot = [sum(col, mpq(0)) for col in zip(*A)] if A else [mpq(0)] * (D + 1)
    return DecompositionParts(part(a_tot), part(B), part(C))


def lexicographic_sum(g: int, d: Sequence[int]) -> PiLaurent:
    """1 - [tau_d]_g / V_{g,n} assembled from single-index increments.

    Coordinates are raised in order, first to last; each step brings the
    incremented slot to the front and uses :func:`difference_decomposition`.
    """
    d = tuple(d)
    canonical_key(g, d)
    total = PiLaurent()
    x = [0] * len(d)
    for i, target in enumerate(d):
        for t in range(target):
            x[i] = t
            k = (x[i],) + tuple(x[:i] + x[i + 1 :])
            total = total + difference_decomposition(g, k).total
        x[i] = target
    return total


@dataclass(frozen=True)
class ContributionCase:
    name: str
    case: int
    n: int
    d: tuple
    k: tuple  # index vector handed to difference_decomposition
    v1_limit: PiLaurent
    v2_limit: PiLaurent

    @property
    def total_limit(self) -> PiLaurent:
        return self.v1_limit + self.v2_limit


def _case1(n, d):
    s = sum(1 for x in d if x)
    D = sum(d)
    k = (0,) + tuple(x for x in d if x) + (0,) * (n - s - 1)
    return ContributionCase(
        f"case1-n{n}-d{''.join(map(str, d))}",
        1,
        n,
        tuple(d),
        k,
        PiLaurent.monomial(2 * D + mpq(n + s - 1, 2), -1),
        PiLaurent.monomial(mpq(1, 2), -1),
    )


def _case2(n, d):
    kk = d[0]
    D = sum(d)
    return ContributionCase(
        f"case2-n{n}-d{''.join(map(str, d))}",
        2,
        n,
        tuple(d),
        tuple(d),
        PiLaurent.monomial(2 * D - 2 * kk + n - 1, -1),
        PiLaurent.monomial(2 * kk - mpq(1, 2), -1),
    )


CONTRIBUTION_CASES = {
    c.name: c
    for c in (
        _case1(2, (1, 0)),
        _case1(2, (0, 0)),
        _case2(1, (1,)),
        _case2(2, (1, 0)),
    )
}


@dataclass(frozen=True)
class ContributionReport:
    case: ContributionCase
    g_range: tuple
    v1: ExtrapolationReport  # fits of g * V_i
    v2: ExtrapolationReport
    v3: ExtrapolationReport
    tolerance: float

    def deviation(self, which: int) -> float:
        """|fit - limit| relative to the limit, or in units of 1/pi^2 when the limit is 0."""
        rep, lim = {1: (self.v1, self.case.v1_limit), 2: (self.v2, self.case.v2_limit)}[which]
        bits = rep.precision_bits or DEFAULT_PRECISION
        est = rep.numeric(0, bits)
        target = eval_real(lim, bits)
        scale = target if lim else eval_real(PiLaurent.monomial(1, -1), bits)
        return abs(float((est - target) / scale))

    @property
    def v3_within_spread(self) -> bool:
        c = abs(float(self.v3.numeric(0)))
        return c <= 5 * float(self.v3.spread(0))

    @property
    def passed(self) -> bool:
        return self.deviation(1) <= self.tolerance and self.deviation(2) <= self.tolerance and self.v3_within_spread

    def to_dict(self) -> dict:
        return {
            "case": self.case.name,
            "k": list(self.case.k),
            "g_range": list(self.g_range),
            "v1_fit": self.v1.numeric(0).to_decimal(12),
            "v1_limit": format_closed_form(self.case.v1_limit),
            "v1_deviation": float(f"{self.deviation(1):.6e}"),
            "v2_fit": self.v2.numeric(0).to_decimal(12),
            "v2_limit": format_closed_form(self.case.v2_limit),
            "v2_deviation": float(f"{self.deviation(2):.6e}"),
            "v3_fit": self.v3.numeric(0).to_decimal(12),
            "v3_spread": self.v3.spread(0).to_decimal(6),
            "passed": self.passed,
        }


def first_order_contributions(
    case: str | ContributionCase,
    g_range: tuple = (12, 20),
    s: int = 3,
    precision_bits: int = DEFAULT_PRECISION,
    tolerance: float = 0.05,
) -> ContributionReport:
    """Fit g*V_1, g*V_2, g*V_3 over ``g_range`` for one of the listed increment cases."""
    if isinstance(case, str):
        try:
            case = CONTRIBUTION_CASES[case]
        except KeyError:
            raise DomainError(f"unknown case {case!r}") from None
    lo, hi = g_range
    if hi - lo < s or lo < 2:
        raise DomainError("g-range too short or starts below g = 2")
    reserve_genus(hi)
    cols = ([], [], [])
    for g in range(lo, hi + 1):
        parts = difference_decomposition(g, case.k)
        for col, v in zip(cols, (parts.V1, parts.V2, parts.V3)):
            col.append((g, eval_real(v * g, precision_bits)))
    fits = [vandermonde_extrapolate(col, s, precision_bits) for col in cols]
    return ContributionReport(case, (lo, hi), *fits, tolerance)
