"""Genus expansion of the KdV hierarchy at the kappa_1-shifted point.

Brackets with kappa_1 are psi-class correlators evaluated at the shifted times
t_k = p_k = (-1)^k/(k-1)! (k >= 2) and t_0 = x, with the kappa_1 weight
normalized to 1.  The engine stores, per genus, truncated Taylor series in x of

* U   = d^2 F / dx^2,
* R_k = <<tau_{k-1} tau_0>>  (Gelfand-Dickey polynomials, R_1 = U),

built by the Lenard recursion.  The integration constant at each step comes
from the quadratic identity among the S_n = (2n-1)!! R_n, and U itself is
fixed by the string equation.  Two-point functions follow from a closed
bilinear formula in the S_n, three-point functions from differentiating it
along a KdV flow.

Everything returned here is in pure-psi normalization at kappa
weight 1; callers convert to the bracket normalization.
"""
from __future__ import annotations

import threading
from math import factorial

from gmpy2 import mpq

from .exact import alpha, double_factorial

__all__ = ["ShiftedKdV", "wk_to_reduced"]

_ZERO = mpq(0)


def _shift(k: int) -> mpq:
    return mpq((-1) ** k, factorial(k - 1))


def _mul(a, b, n):
    """Product of two series truncated to degree n."""
    out = [_ZERO] * (n + 1)
    lb = len(b)
    for i, ai in enumerate(a[: n + 1]):
        if not ai:
            continue
        for j in range(min(lb, n + 1 - i)):
            bj = b[j]
            if bj:
                out[i + j] += ai * bj
    return out


def _deriv(a, k=1):
    for _ in range(k):
        a = [a[i] * i for i in range(1, len(a))]
    return a


def _series_div(num, den, n):
    out = [_ZERO] * (n + 1)
    inv = 1 / den[0]
    for i in range(n + 1):
        v = num[i]
        for j in range(max(0, i - len(den) + 1), i):
            v -= out[j] * den[i - j]
        out[i] = v * inv
    return out


def _add_into(acc, a, scale=1):
    for i in range(min(len(acc), len(a))):
        if a[i]:
            acc[i] += scale * a[i]


_DF: list[int] = [1, 1]


def _df(n: int) -> int:
    """(2n-1)!! for n >= 0."""
    while len(_DF) <= n:
        _DF.append(_DF[-1] * (2 * len(_DF) - 1))
    return _DF[n]


def wk_to_reduced(g: int, d, q) -> mpq:
    """Rational part of the bracket from the shifted WK correlator q."""
    d0 = 3 * g - 3 + len(d) - sum(d)
    f = 2**d0
    for di in d:
        f *= 4**di * double_factorial(2 * di + 1)
    return q * f


class ShiftedKdV:
    """Series data up to ``max_genus`` with x-expansions of length ``x_order``.

    Top-genus series are known to degree ``x_order + 4``; each genus below
    carries two more terms, which the third-derivative term of the recursion
    consumes.
    """

    def __init__(self, max_genus: int, x_order: int = 4):
        if max_genus < 0 or x_order < 0:
            raise ValueError("max_genus and x_order must be nonnegative")
        self.max_genus = max_genus
        self.x_order = x_order
        self._lock = threading.RLock()
        self._omega: dict = {}
        self._one: dict = {}
        self._diag2: dict = {}
        self._S: dict = {}
        self._Sder: dict = {}
        self._conv_c: dict = {}
        self._dconv_c: dict = {}
        self._T_c: dict = {}
        self._dT_c: dict = {}
        self._dS_c: dict = {}
        self._build()

    # -- construction -------------------------------------------------------
    def depth(self, g: int) -> int:
        """Degree to which the genus-g series are exact."""
        return self.x_order + 2 * (self.max_genus - g) + 4

    def _build(self):
        G = self.max_genus
        n0 = self.depth(0)
        # genus 0: U0 = x + sum_k p_k U0^k / k!, solved by fixed point
        u0 = [_ZERO] * (n0 + 1)
        u0[1] = mpq(1)
        for _ in range(n0 + 1):
            acc = [_ZERO] * (n0 + 1)
            acc[1] = mpq(1)
            pw = u0[:]
            for k in range(2, n0 + 2):
                pw = _mul(pw, u0, n0)
                if not any(pw):
                    break
                _add_into(acc, pw, _shift(k) / factorial(k))
            if acc == u0:
                break
            u0 = acc
        self.U = {0: u0}
        kmax = 3 * G + n0 + 2
        self.kmax = kmax
        r0 = {}
        pw = [mpq(1)] + [_ZERO] * n0
        for k in range(kmax + 1):
            r0[k] = [c / factorial(k) for c in pw]
            pw = _mul(pw, u0, n0)
        self.R = {0: r0}
        self._s0 = {0: self._s_row(r0, kmax)}
        for g in range(1, G + 1):
            self._build_genus(g)

    @staticmethod
    def _s_row(rg, kmax):
        """S_i(0), S_i'(0), S_i''(0) for i <= kmax."""
        s0, s1, s2 = [], [], []
        for i in range(kmax + 1):
            ser = rg.get(i)
            c = _df(i)
            if ser is None:
                s0.append(_ZERO), s1.append(_ZERO), s2.append(_ZERO)
                continue
            s0.append(ser[0] * c)
            s1.append(ser[1] * c if len(ser) > 1 else _ZERO)
            s2.append(2 * ser[2] * c if len(ser) > 2 else _ZERO)
        return s0, s1, s2

    def _build_genus(self, g):
        N = self.depth(g)
        top = 3 * g + N + 1
        R, U = self.R, self.U
        rg = {0: [_ZERO] * (N + 1), 1: [_ZERO] * (N + 1)}
        for k in range(1, top):
            # (2k+1) R_{k+1}' = sum (R_k U' + 2 R_k' U) + R_k''' / 4, with U_g = 0 for now
            rhs = [_ZERO] * N
            for g1 in range(g + 1):
                g2 = g - g1
                if g2 == g:
                    continue
                rk = (rg if g1 == g else R[g1])[k]
                u = U[g2]
                _add_into(rhs, _mul(rk, _deriv(u), N - 1))
                _add_into(rhs, _mul(_deriv(rk), u, N - 1), 2)
            _add_into(rhs, _deriv(R[g - 1][k], 3), mpq(1, 4))
            inv = mpq(1, 2 * k + 1)
            ser = [_ZERO] + [rhs[i] * inv / (i + 1) for i in range(N)]
            rg[k + 1] = ser
            ser[0] = self._constant(rg, g, k + 1)
        # string equation fixes U_g; then add its linear contribution to every R_k
        num = [_ZERO] * (N + 1)
        den = [_ZERO] * (N + 1)
        den[0] = mpq(1)
        for k in range(2, top + 1):
            p = _shift(k)
            _add_into(num, rg[k], p)
            _add_into(den, R[0][k - 1], -p)
        ug = _series_div(num, den, N)
        U[g] = ug
        rg[1] = ug[:]
        for k in range(2, top + 1):
            _add_into(rg[k], _mul(ug, R[0][k - 1], N))
        for k in range(top + 1, self.kmax + 1):
            rg[k] = [_ZERO] * (N + 1)
        R[g] = rg
        self._s0[g] = self._s_row(rg, self.kmax)

    def _constant(self, rg, g, n):
        """R_n^{(g)}(0) from the quadratic identity at x = 0.

        2 S_n = -sum_{i+j=n} S_i S_j + 2 U sum_{i+j=n-1} S_i S_j
                + (1/4) sum_{i+j=n-1} (2 S_i S_j'' - S_i' S_j'),
        genus-graded, the last sum one genus lower; U_g(0) is still zero.
        """
        cur = [rg[i][0] * _df(i) for i in range(n)]
        tabs = self._s0

        def s0(gg, i):
            if gg == g:
                return cur[i] if i < n else _ZERO
            return tabs[gg][0][i]

        tot = _ZERO
        for i in range(1, n):
            j = n - i
            for g1 in range(g + 1):
                a = s0(g1, i)
                if a:
                    tot -= a * s0(g - g1, j)
        for gu in range(1, g):
            u = self.U[gu][0]
            if not u:
                continue
            h = g - gu
            acc = _ZERO
            for i in range(n):
                j = n - 1 - i
                for g1 in range(h + 1):
                    a = s0(g1, i)
                    if a:
                        acc += a * s0(h - g1, j)
            tot += 2 * u * acc
        for i in range(n):
            j = n - 1 - i
            for g1 in range(g):
                g2 = g - 1 - g1
                _, s1a, s2a = tabs[g1]
                s0b, s1b, s2b = tabs[g2]
                t = 2 * s0(g1, i) * s2b[j] - s1a[i] * s1b[j]
                if t:
                    tot += t / 4
        return tot / 2 / _df(n)

    # -- series access --------------------------------------------------------
    def S(self, g: int, i: int):
        """(2i-1)!! R_i^{(g)} as a series, or None when identically zero."""
        if g < 0 or i < 0 or g > self.max_genus or i > self.kmax:
            return None
        hit = self._S.get((g, i))
        if hit is None:
            c = _df(i)
            hit = self._S[(g, i)] = [v * c for v in self.R[g][i]]
        return hit

    def _Sd(self, g, i, order, nder=0):
        key = (g, i, nder)
        s = self._Sder.get(key)
        if s is None:
            s = self.S(g, i)
            if s is None:
                return None
            s = self._Sder[key] = _deriv(s, nder)
        return s[: order + 1]

    # -- volumes and one-tau0-chains ----------------------------------------
    def volume_wk(self, g: int, n: int) -> mpq:
        """<tau_0^n>_g at the shifted point, n >= 2."""
        a = n - 2
        self._need(g, a)
        return self.U[g][a] * factorial(a)

    def r_chain_wk(self, g: int, k: int, m: int) -> mpq:
        """<tau_k tau_0^m>_g for m >= 1, read off R_{k+1}."""
        self._need(g, m - 1)
        if k + 1 > self.kmax:
            return _ZERO
        return self.R[g][k + 1][m - 1] * factorial(m - 1)

    def _need(self, g, order):
        if g > self.max_genus or order > self.depth(g):
            raise ValueError(f"engine too small for genus {g}, order {order}")

    # -- two-point function ---------------------------------------------------
    #
    # With Omega(z, w) = sum <<tau_a tau_b>> (2a+1)!! (2b+1)!! z^(a+1) w^(b+1)
    # and S(z) = sum S_i z^i, the genus-graded identity
    #
    #   (1/z - 1/w)^2 Omega = (1/z + 1/w)(S(z) S(w) - 1) - 4 U S(z) S(w)
    #                         + (1/2) S'(z) S'(w) - (1/2)(S(z) S''(w) + S''(z) S(w)),
    #
    # primes meaning d/dx and the last line one genus down, determines every
    # two-point function.  T_{A,B} is the z^A w^B coefficient of the right side.

    def _cached(self, cache, key, order, compute):
        hit = cache.get(key)
        if hit is not None and len(hit) > order:
            return hit[: order + 1]
        res = compute(order)
        cache[key] = res
        return res

    def _conv(self, h, i, ni, j, nj, order):
        """sum_{g1+g2=h} S_i^{(ni)} S_j^{(nj)} truncated to the given degree."""
        if h < 0 or i < 0 or j < 0:
            return None

        def compute(order):
            out = [_ZERO] * (order + 1)
            for g1 in range(h + 1):
                a = self._Sd(g1, i, order, ni)
                if a is None:
                    continue
                b = self._Sd(h - g1, j, order, nj)
                if b is not None:
                    _add_into(out, _mul(a, b, order))
            return out

        return self._cached(self._conv_c, (h, i, ni, j, nj), order, compute)

    def _T(self, g, A, B, order):
        def compute(order):
            out = [_ZERO] * (order + 1)
            for part in (self._conv(g, A - 2, 0, B - 1, 0, order), self._conv(g, A - 1, 0, B - 2, 0, order)):
                if part is not None:
                    _add_into(out, part)
            if g == 0 and (A, B) in ((2, 1), (1, 2)):
                out[0] -= 1
            a, b = A - 2, B - 2
            if a >= 0 and b >= 0:
                half = mpq(1, 2)
                for (ni, nj, w) in ((1, 1, half), (0, 2, -half), (2, 0, -half)):
                    part = self._conv(g - 1, a, ni, b, nj, order)
                    if part is not None:
                        _add_into(out, part, w)
                for gu in range(g + 1):
                    part = self._conv(g - gu, a, 0, b, 0, order)
                    if part is not None:
                        _add_into(out, _mul(self.U[gu], part, order), -4)
            return out

        return self._cached(self._T_c, (g, A, B), order, compute)

    def omega_series(self, g: int, a: int, b: int, order: int):
        """<<tau_a tau_b>>_g as a series in x to the given degree."""
        if a < b:
            a, b = b, a
        self._need(g, order)

        def compute(order):
            acc = [_ZERO] * (order + 1)
            for j in range(a + 1):
                _add_into(acc, self._T(g, a + 1 - j, b + 3 + j, order), j + 1)
            den = _df(a + 1) * _df(b + 1)
            return [c / den for c in acc]

        with self._lock:
            return self._cached(self._omega, (g, a, b), order, compute)

    def two_point_wk(self, g: int, a: int, b: int, m: int = 0) -> mpq:
        """<tau_a tau_b tau_0^m>_g."""
        return self.omega_series(g, a, b, m)[m] * factorial(m)

    # -- three-point function ---------------------------------------------------
    #
    # d/dt_c acts by d S_i = (2i-1)!! d/dx <<tau_c tau_{i-1}>> and
    # d U = d/dx <<tau_c tau_0>>; differentiating T_{A,B} term by term gives
    # <<tau_a tau_b tau_c>>.

    def _dS(self, c, g, i, order, nder):
        if i <= 0 or g < 0:
            return None

        def compute(order):
            om = self.omega_series(g, c, i - 1, order + 1)
            return [v * _df(i) for v in _deriv(om)]

        base = self._cached(self._dS_c, (c, g, i), order + nder, compute)
        return _deriv(base, nder)[: order + 1]

    def _dU(self, c, g, order):
        return _deriv(self.omega_series(g, c, 0, order + 1))[: order + 1]

    def _dconv(self, c, h, i, ni, j, nj, order):
        if h < 0 or i < 0 or j < 0:
            return None

        def compute(order):
            out = [_ZERO] * (order + 1)
            for g1 in range(h + 1):
                g2 = h - g1
                a = self._Sd(g1, i, order, ni)
                b = self._Sd(g2, j, order, nj)
                da = self._dS(c, g1, i, order, ni)
                db = self._dS(c, g2, j, order, nj)
                if da is not None and b is not None:
                    _add_into(out, _mul(da, b, order))
                if a is not None and db is not None:
                    _add_into(out, _mul(a, db, order))
            return out

        return self._cached(self._dconv_c, (c, h, i, ni, j, nj), order, compute)

    def _dT(self, c, g, A, B, order):
        def compute(order):
            out = [_ZERO] * (order + 1)
            for part in (
                self._dconv(c, g, A - 2, 0, B - 1, 0, order),
                self._dconv(c, g, A - 1, 0, B - 2, 0, order),
            ):
                if part is not None:
                    _add_into(out, part)
            a, b = A - 2, B - 2
            if a >= 0 and b >= 0:
                half = mpq(1, 2)
                for (ni, nj, w) in ((1, 1, half), (0, 2, -half), (2, 0, -half)):
                    part = self._dconv(c, g - 1, a, ni, b, nj, order)
                    if part is not None:
                        _add_into(out, part, w)
                for gu in range(g + 1):
                    p = self._conv(g - gu, a, 0, b, 0, order)
                    if p is None:
                        continue
                    _add_into(out, _mul(self._dU(c, gu, order), p, order), -4)
                    dp = self._dconv(c, g - gu, a, 0, b, 0, order)
                    _add_into(out, _mul(self.U[gu], dp, order), -4)
            return out

        return self._cached(self._dT_c, (c, g, A, B), order, compute)

    def three_point_wk(self, g: int, a: int, b: int, c: int, m: int = 0) -> mpq:
        """<tau_a tau_b tau_c tau_0^m>_g."""
        a, b, c = sorted((a, b, c), reverse=True)
        # differentiate along the smallest index: fewest omega series needed
        self._need(g, m + 1)
        with self._lock:
            acc = [_ZERO] * (m + 1)
            for j in range(a + 1):
                _add_into(acc, self._dT(c, g, a + 1 - j, b + 3 + j, m), j + 1)
        return acc[m] * factorial(m) / (_df(a + 1) * _df(b + 1))

    # -- one-point brackets via the n = 1 case of the kappa recursion ----------
    def diag_two(self, h: int, m: int) -> mpq:
        """sum_{k1+k2=m} of reduced two-point brackets at genus h."""
        if h < 1 or m < 0 or m > 3 * h - 1:
            return _ZERO
        key = (h, m)
        hit = self._diag2.get(key)
        if hit is not None:
            return hit
        tot = _ZERO
        for k1 in range(m + 1):
            k2 = m - k1
            tot += wk_to_reduced(h, (k1, k2), self.two_point_wk(h, k1, k2))
        self._diag2[key] = tot
        return tot

    def one_point_reduced(self, g: int, k: int) -> mpq:
        if g < 1 or k < 0 or k > 3 * g - 2:
            return _ZERO
        if g == 1:
            return mpq(1, 12) if k == 0 else mpq(1, 2)
        key = (g, k)
        hit = self._one.get(key)
        if hit is not None:
            return hit
        d0 = 3 * g - 2 - k
        tot = _ZERO
        for L in range(d0 + 1):
            m = L + k - 2
            if m < 0:
                continue
            inner = self.diag_two(g - 1, m)
            for g1 in range(1, g):
                g2 = g - g1
                for k1 in range(max(0, m - 3 * g2 + 2), min(m, 3 * g1 - 2) + 1):
                    inner += self.one_point_reduced(g1, k1) * self.one_point_reduced(g2, m - k1)
            tot += alpha(L) * inner
        tot *= 16
        self._one[key] = tot
        return tot
