"""Weil-Petersson volumes, their polynomials in the boundary lengths, and checks.

``volume_polynomial(g, n)`` holds the coefficients of V_{g,n}(2L) in the
variables L_i, i.e. bracket(g, d) / prod (2 d_i + 1)!.  Public evaluators take
true geodesic lengths b and use L_i = b_i / 2.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import permutations
from math import factorial
from typing import Iterable, Iterator, Sequence

import mpmath
from gmpy2 import mpq

from .errors import DomainError
from .exact import (
    DEFAULT_PRECISION,
    HighPrecisionReal,
    PiLaurent,
    _check_precision,
    eval_real,
    gamma_half,
    log_eval,
)
from .intersection import bracket, bracket_reduced

__all__ = [
    "volume",
    "volume_polynomial",
    "VolumePolynomial",
    "evaluate_volume",
    "ratio_tau",
    "ratio_np1",
    "ratio_gm1",
    "ratio_gp1",
    "zograf_ratio",
    "PolynomialIdentityReport",
    "verify_pde1",
    "verify_pde2",
    "SinhReport",
    "sinh_bound_check",
    "kimura_ratio",
    "VolumeTable",
    "build_table",
    "table_export",
    "table_import",
]


def _check_stable(g: int, n: int) -> None:
    if not isinstance(g, int) or not isinstance(n, int) or g < 0 or n < 0:
        raise DomainError("g and n must be nonnegative integers")
    if 2 * g - 2 + n <= 0:
        raise DomainError(f"(g, n) = ({g}, {n}) is unstable")


def _volume_reduced(g: int, n: int) -> mpq:
    _check_stable(g, n)
    if n >= 1:
        return bracket_reduced(g, (0,) * n)
    # n = 0: the dilaton-type kappa relation at n = 0, solved for V_{g,0}
    tot = mpq(0)
    for L in range(1, 3 * g - 1):
        tot += mpq((-1) ** (L - 1) * L, factorial(2 * L + 1)) * bracket_reduced(g, (L,))
    return tot / (4 * g - 4)


def volume(g: int, n: int) -> PiLaurent:
    """V_{g,n} as q * pi^(2(3g-3+n))."""
    return PiLaurent.monomial(_volume_reduced(g, n), 3 * g - 3 + n)


# ---------------------------------------------------------------------------
# polynomials


def _multisets(total_max: int, n: int) -> Iterator[tuple]:
    """Descending tuples of length n with sum <= total_max."""

    def rec(remaining, slots, cap):
        if slots == 0:
            yield ()
            return
        for x in range(min(remaining, cap), -1, -1):
            for tail in rec(remaining - x, slots - 1, x):
                yield (x,) + tail

    yield from rec(total_max, n, total_max)


@dataclass(frozen=True)
class VolumePolynomial:
    """Coefficients of V_{g,n}(2L) = sum_d c_d prod L_i^(2 d_i).

    Coefficients are stored once per multiset of exponents; the polynomial is
    symmetric, so any ordering of an index vector maps to the same entry.
    """

    g: int
    n: int
    by_multiset: dict = field(repr=False)  # descending d -> rational part

    @property
    def degree(self) -> int:
        return 3 * self.g - 3 + self.n

    def coefficient(self, d: Sequence[int]) -> PiLaurent:
        d = tuple(d)
        if len(d) != self.n or min(d, default=0) < 0:
            raise DomainError(f"index vector must have {self.n} nonnegative entries")
        key = tuple(sorted(d, reverse=True))
        q = self.by_multiset.get(key)
        if q is None:
            return PiLaurent()
        return PiLaurent.monomial(q, self.degree - sum(d))

    @property
    def constant_term(self) -> PiLaurent:
        return self.coefficient((0,) * self.n)

    def coefficients(self) -> Iterator[tuple]:
        """(d, coefficient) over every ordered index vector."""
        vectors = sorted(d for key in self.by_multiset for d in set(permutations(key)))
        for d in vectors:
            yield d, self.coefficient(d)

    def __len__(self):
        return sum(1 for _ in self.coefficients())

    def __eq__(self, other):
        return (
            isinstance(other, VolumePolynomial)
            and (self.g, self.n) == (other.g, other.n)
            and self.by_multiset == other.by_multiset
        )

    def __hash__(self):
        return hash((self.g, self.n, tuple(sorted(self.by_multiset.items()))))


def volume_polynomial(g: int, n: int) -> VolumePolynomial:
    _check_stable(g, n)
    if n < 1:
        raise DomainError("volume polynomials need at least one boundary")
    coeffs = {}
    for d in _multisets(3 * g - 3 + n, n):
        den = 1
        for x in d:
            den *= factorial(2 * x + 1)
        coeffs[d] = bracket_reduced(g, d) / den
    return VolumePolynomial(g, n, coeffs)


def _lengths(b: Sequence, n: int) -> list:
    b = list(b)
    if len(b) != n:
        raise DomainError(f"expected {n} boundary lengths, got {len(b)}")
    for x in b:
        if x < 0:
            raise DomainError("boundary lengths must be nonnegative")
    return b


def evaluate_volume(
    poly: VolumePolynomial, b: Sequence, precision_bits: int = DEFAULT_PRECISION
) -> HighPrecisionReal:
    """V_{g,n}(b_1, ..., b_n) at true boundary lengths b."""
    _check_precision(precision_bits)
    b = _lengths(b, poly.n)
    with mpmath.workprec(precision_bits + 32):
        L2 = [(mpmath.mpf(x) / 2) ** 2 for x in b]
        pi2 = mpmath.pi**2
        total = mpmath.mpf(0)
        for d, c in poly.coefficients():
            q, e = c.as_monomial()
            term = mpmath.mpf(int(q.numerator)) / int(q.denominator) * pi2**e
            for li, di in zip(L2, d):
                if di:
                    term *= li**di
            total += term
    return HighPrecisionReal.of(total, precision_bits)


# ---------------------------------------------------------------------------
# ratios


def ratio_tau(g: int, d: Iterable[int]) -> PiLaurent:
    """[tau_d]_g / V_{g,n}."""
    d = tuple(d)
    return bracket(g, d) / volume(g, len(d))


def ratio_np1(g: int, n: int) -> PiLaurent:
    """4 pi^2 (2g-2+n) V_{g,n} / V_{g,n+1}."""
    _check_stable(g, n)
    return PiLaurent.monomial(4 * (2 * g - 2 + n), 1) * volume(g, n) / volume(g, n + 1)


def ratio_gm1(g: int, n: int) -> PiLaurent:
    """V_{g-1,n+2} / V_{g,n}."""
    _check_stable(g, n)
    if g < 1:
        raise DomainError("ratio_gm1 needs g >= 1")
    return volume(g - 1, n + 2) / volume(g, n)


def ratio_gp1(g: int, n: int) -> PiLaurent:
    """V_{g+1,n} / V_{g,n}."""
    _check_stable(g, n)
    return volume(g + 1, n) / volume(g, n)


def zograf_ratio(g: int, n: int, precision_bits: int = DEFAULT_PRECISION) -> HighPrecisionReal:
    """V_{g,n} sqrt(g) / ((2g-3+n)! (4 pi^2)^(2g-3+n)), evaluated in log space."""
    _check_precision(precision_bits)
    _check_stable(g, n)
    m = 2 * g - 3 + n
    if m < 0:
        raise DomainError("zograf_ratio needs 2g-3+n >= 0")
    if g == 0:
        raise DomainError("zograf_ratio needs g >= 1")
    lv = log_eval(volume(g, n), precision_bits + 32)
    with mpmath.workprec(precision_bits + 32):
        s = lv.value + mpmath.log(g) / 2 - mpmath.loggamma(m + 1) - m * mpmath.log(4 * mpmath.pi**2)
        v = mpmath.exp(s)
    return HighPrecisionReal.of(v, precision_bits)


# ---------------------------------------------------------------------------
# the two boundary PDEs


@dataclass(frozen=True)
class PolynomialIdentityReport:
    name: str
    g: int
    n: int
    checked: int
    mismatches: tuple  # (d, lhs, rhs) per failing coefficient
    note: str = ""

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def summary(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f" [{self.note}]" if self.note else ""
        return f"{tag} {self.name} (g={self.g}, n={self.n}) {self.checked} coefficients{extra}"


def _pde_sides(g: int, n: int, lhs_weight, rhs_factor):
    """Compare sum_k w(k) pi^(2(k-1)) c_{(d,k)} with rhs_factor(d) c'_d for all d."""
    _check_stable(g, n)
    big = volume_polynomial(g, n + 1)
    if n == 0:
        # V_{g,0} is a constant: a polynomial in no variables
        small = VolumePolynomial(g, 0, {(): _volume_reduced(g, 0)})
    else:
        small = volume_polynomial(g, n)
    mismatches = []
    checked = 0
    for d in small.by_multiset:
        lhs = PiLaurent()
        for k in range(1, big.degree - sum(d) + 1):
            c = big.coefficient(d + (k,))
            if c:
                lhs = lhs + c.shift(k - 1) * lhs_weight(k)
        rhs = small.coefficient(d) * rhs_factor(d)
        checked += 1
        if lhs != rhs:
            mismatches.append((d, lhs, rhs))
    return checked, tuple(mismatches)


def verify_pde1(g: int, n: int) -> PolynomialIdentityReport:
    """d/db_{n+1} V_{g,n+1}(b, 2 pi i) = 2 pi i (2g-2+n) V_{g,n}(b).

    In the L = b/2 coefficients, (2 pi i)^(2k-1) = (-4 pi^2)^k / (2 pi i), and
    after clearing the common factor the coefficient of prod L^(2 d) reads
    sum_k (-1)^(k+1) k pi^(2(k-1)) c_{(d,k)} = 2 (2g-2+n) c'_d.
    """
    checked, bad = _pde_sides(
        g, n, lambda k: mpq((-1) ** (k + 1) * k), lambda d: 2 * (2 * g - 2 + n)
    )
    return PolynomialIdentityReport("pde1", g, n, checked, bad)


def verify_pde2(g: int, n: int, sign: int = 1) -> PolynomialIdentityReport:
    """d^2/db_{n+1}^2 V_{g,n+1}(b, 2 pi i) = sum_j b_j d_j V_{g,n}(b) + sign (4g-4+n) V_{g,n}(b).

    ``b_j`` is read as the j-th boundary length, so sum_j b_j d_j is the Euler
    operator and contributes 2|d| on the coefficient of prod L^(2 d).
    ``sign=1`` is the form as printed; ``sign=-1`` flips the last term.
    Coefficientwise: sum_k (-1)^(k-1) k (2k-1)/2 pi^(2(k-1)) c_{(d,k)}
    = (2|d| + sign (4g-4+n)) c'_d.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    checked, bad = _pde_sides(
        g,
        n,
        lambda k: mpq((-1) ** (k - 1) * k * (2 * k - 1), 2),
        lambda d: 2 * sum(d) + sign * (4 * g - 4 + n),
    )
    note = "interpreted: b_j = L_j" + ("" if sign == 1 else ", sign of (4g-4+n) term flipped")
    return PolynomialIdentityReport("pde2", g, n, checked, bad, note)


# ---------------------------------------------------------------------------
# boundary-length asymptotics


@dataclass(frozen=True)
class SinhReport:
    g: int
    n: int
    b: tuple
    ratio: HighPrecisionReal  # V(b) / V
    sinh_product: HighPrecisionReal
    upper_ok: bool
    implied_c: HighPrecisionReal | None


def _sinh_product(b, prec):
    with mpmath.workprec(prec + 32):
        p = mpmath.mpf(1)
        for x in b:
            if x:
                h = mpmath.mpf(x) / 2
                p *= mpmath.sinh(h) / h
    return HighPrecisionReal.of(p, prec)


def sinh_bound_check(
    g: int, n: int, b: Sequence, precision_bits: int = DEFAULT_PRECISION
) -> SinhReport:
    """V(b)/V <= prod sinh(b_i/2)/(b_i/2), plus the constant the lower bound would need."""
    _check_stable(g, n)
    if n < 1:
        raise DomainError("sinh_bound_check needs n >= 1")
    b = tuple(_lengths(b, n))
    poly = volume_polynomial(g, n)
    ratio = evaluate_volume(poly, b, precision_bits) / eval_real(poly.constant_term, precision_bits)
    sp = _sinh_product(b, precision_bits)
    # allow rounding at the last few bits when both sides coincide (b = 0)
    slack = HighPrecisionReal.of(mpmath.mpf(2) ** (16 - precision_bits), precision_bits)
    upper_ok = ratio <= sp * (1 + slack)
    sb2 = sum(x * x for x in b)
    implied = None
    if sb2:
        implied = (1 - ratio / sp) * g / HighPrecisionReal.of(sb2, precision_bits)
    return SinhReport(g, n, b, ratio, sp, bool(upper_ok), implied)


def kimura_ratio(
    g: int, n: int, b: Sequence, precision_bits: int = DEFAULT_PRECISION
) -> HighPrecisionReal:
    """V_{g,n}(b) / (sqrt(2/pi) (4 pi^2)^(2g-3+n) Gamma(2g+n-5/2) prod sinh(b_i/2)/(b_i/2))."""
    _check_stable(g, n)
    if n < 1:
        raise DomainError("kimura_ratio needs n >= 1")
    m = 2 * g - 3 + n
    if m < 0:
        raise DomainError("kimura_ratio needs 2g-3+n >= 0")
    b = tuple(_lengths(b, n))
    work = precision_bits + 32
    vb = evaluate_volume(volume_polynomial(g, n), b, work)
    gh = gamma_half(m)  # Gamma(m + 1/2) = Gamma(2g+n-5/2)
    with mpmath.workprec(work):
        log_den = (
            (mpmath.log(2) - mpmath.log(mpmath.pi)) / 2
            + m * mpmath.log(4 * mpmath.pi**2)
            + mpmath.log(int(gh.rational.numerator))
            - mpmath.log(int(gh.rational.denominator))
            + mpmath.log(mpmath.pi) / 2
        )
        v = mpmath.exp(mpmath.log(vb.value) - log_den) / _sinh_product(b, work).value
    return HighPrecisionReal.of(v, precision_bits)


# ---------------------------------------------------------------------------
# tables


@dataclass
class VolumeTable:
    entries: dict = field(default_factory=dict)  # (g, n) -> PiLaurent
    provenance: dict = field(default_factory=dict)  # (g, n) -> "computed" | "loaded"

    def add(self, g: int, n: int, value: PiLaurent, provenance: str = "computed") -> None:
        self.entries[(g, n)] = value
        self.provenance[(g, n)] = provenance

    def keys(self):
        return sorted(self.entries)

    def __eq__(self, other):
        return isinstance(other, VolumeTable) and self.entries == other.entries


def build_table(genera: Iterable[int], ns: Iterable[int]) -> VolumeTable:
    table = VolumeTable()
    ns = list(ns)
    for g in genera:
        for n in ns:
            if 2 * g - 2 + n > 0:
                table.add(g, n, volume(g, n))
    return table


def table_export(table: VolumeTable, fmt: str = "csv", decimal: bool = False, digits: int = 30) -> str:
    """CSV (``g,n,value``) or JSON (``{"wpvol": 1, "entries": [...]}``)."""

    def show(v: PiLaurent) -> str:
        if decimal:
            return eval_real(v).to_decimal(digits)
        return v.to_text()

    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["g", "n", "value"])
        for g, n in table.keys():
            w.writerow([g, n, show(table.entries[(g, n)])])
        return buf.getvalue()
    if fmt == "json":
        entries = [{"g": g, "n": n, "value": show(table.entries[(g, n)])} for g, n in table.keys()]
        return json.dumps({"wpvol": 1, "entries": entries}, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _check_entry(g, n, value, where) -> tuple:
    try:
        g, n = int(g), int(n)
        v = PiLaurent.from_text(str(value))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: {exc}") from None
    if 2 * g - 2 + n <= 0 or g < 0 or n < 0:
        raise ValueError(f"{where}: unstable (g, n) = ({g}, {n})")
    if not v.is_monomial() or v.as_monomial()[1] != 3 * g - 3 + n:
        raise ValueError(f"{where}: value is not a monomial of pi-degree 3g-3+n")
    return g, n, v


def table_import(text: str) -> VolumeTable:
    """Parse CSV or JSON produced by :func:`table_export` (format sniffed)."""
    table = VolumeTable()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        if data.get("wpvol") != 1:
            raise ValueError('missing or unsupported "wpvol" schema version')
        for i, row in enumerate(data.get("entries", []), start=1):
            if set(row) != {"g", "n", "value"}:
                raise ValueError(f"entry {i}: expected keys g, n, value")
            g, n, v = _check_entry(row["g"], row["n"], row["value"], f"entry {i}")
            table.add(g, n, v, "loaded")
        return table
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["g", "n", "value"]:
        raise ValueError(f"row 1: expected header g,n,value, got {header}")
    for i, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise ValueError(f"row {i}: expected 3 columns")
        g, n, v = _check_entry(*row, f"row {i}")
        table.add(g, n, v, "loaded")
    return table
