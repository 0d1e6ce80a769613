import random
from fractions import Fraction
from math import factorial

import mpmath
import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from wpvol.errors import DomainError
from wpvol.exact import HighPrecisionReal, PiLaurent, eval_real
from wpvol.asymptotics import (
    CONTRIBUTION_CASES,
    EXACT,
    NUMERIC,
    InverseGenusRegressor,
    TruncatedExpansion,
    b1_formula,
    c1_formula,
    compose_ratio_expansion,
    difference_decomposition,
    e1_formula,
    exp_mul,
    exp_product_family,
    exp_reciprocal,
    format_closed_form,
    h1_formula,
    lexicographic_sum,
    partial_product_extrapolate,
    vandermonde_extrapolate,
)
from wpvol.intersection import bracket
from wpvol.volumes import ratio_gm1, ratio_np1, ratio_tau, volume


def T(*cs, mode=None):
    return TruncatedExpansion(list(cs), mode)


small_q = st.builds(lambda a, b: mpq(a, b), st.integers(-9, 9), st.integers(1, 6))


# -- series algebra --------------------------------------------------------------


def test_mul_example():
    assert exp_mul(T(1, 1, 0), T(1, -1, 0)) == T(1, 0, -1)


def test_reciprocal_example():
    u = mpq(3, 7)
    assert exp_reciprocal(T(1, u, 0)) == T(1, -u, u * u)


@given(st.lists(small_q, min_size=4, max_size=4).filter(lambda c: c[0] != 0))
def test_reciprocal_inverts(cs):
    a = T(*cs)
    assert exp_mul(a, exp_reciprocal(a)) == TruncatedExpansion.one(3)


def test_reciprocal_zero_leading():
    with pytest.raises(ZeroDivisionError):
        exp_reciprocal(T(0, 1))


@given(st.integers(1, 8), small_q)
def test_product_family_first_order(n, p):
    assert exp_product_family([T(1, p)] * n) == T(1, n * p)


def test_product_family_two_factors():
    a, b = T(1, 2, 3), T(2, mpq(1, 2), 5)
    assert exp_product_family([a, b]) == exp_mul(a, b)


@pytest.mark.parametrize("j", [1, 2])
def test_leading_n_power_of_product(j):
    # f_i = 1 + (l i + m)/g + (q i^2)/g^2; the 1/g^j coefficient of prod_{i<=n} f_i
    # is a degree-2j polynomial in n with top coefficient l^j / (2^j j!)
    l, m, q = mpq(3), mpq(-2), mpq(5)
    ns = list(range(1, 2 * j + 2))
    vals = []
    for n in ns:
        fs = [T(1, l * i + m, q * i * i) for i in range(1, n + 1)]
        c = exp_product_family(fs)[j].as_monomial()[0]
        vals.append(Fraction(int(c.numerator), int(c.denominator)))
    # Newton divided differences give the top coefficient of the interpolant
    table = list(vals)
    for level in range(1, len(ns)):
        table = [(table[i + 1] - table[i]) / (ns[i + level] - ns[i]) for i in range(len(table) - 1)]
    top = table[0]
    assert top == Fraction(int(l.numerator) ** j, int(l.denominator) ** j) / (2**j * factorial(j))


def test_shift_re_expands():
    # 1/(g-2) = 1/g + 2/g^2 + 4/g^3
    assert T(0, 1, 0, 0).shift(2) == T(0, 1, 2, 4)


def test_evaluate_exact():
    assert T(1, 2).evaluate(4) == PiLaurent.monomial(mpq(3, 2))


def test_mode_discipline():
    ex = T(1, 2)
    nu = TruncatedExpansion([HighPrecisionReal.of(1), HighPrecisionReal.of(2)])
    assert ex.mode == EXACT and nu.mode == NUMERIC
    with pytest.raises(TypeError):
        ex + nu
    with pytest.raises(TypeError):
        TruncatedExpansion([1, HighPrecisionReal.of(2)])
    with pytest.raises(TypeError):
        TruncatedExpansion([PiLaurent.monomial(1)], NUMERIC)
    with pytest.raises(TypeError):
        nu * PiLaurent.monomial(1, 1)
    with pytest.raises(ValueError):
        T(1, 2) + T(1, 2, 3)
    assert all(isinstance(c, PiLaurent) for c in (ex * ex).coefficients)


# -- composition --------------------------------------------------------------------


def test_compose_empty_product():
    one = compose_ratio_expansion(0, 0, 2, 3, {}, {})
    assert one == TruncatedExpansion.one(3)


def test_compose_genus_drop_leading_one():
    src = {k: T(1) for k in range(8)}
    out = compose_ratio_expansion(1, -2, 2, 0, src, src)
    assert out == T(1)


def test_compose_rejects_low_order_and_bad_shift():
    src = {k: T(1, 0) for k in range(8)}
    with pytest.raises(ValueError):
        compose_ratio_expansion(0, 1, 2, 3, src, src)
    with pytest.raises(DomainError):
        compose_ratio_expansion(0, -1, 2, 1, src, src)


def _fit_expansion(fn, n, gs, s):
    rep = vandermonde_extrapolate([(g, eval_real(fn(g, n))) for g in gs], s)
    return TruncatedExpansion(list(rep.coefficients))


def test_compose_cross_validates_direct_fit():
    # (8 pi^2 g) V_{g,1} / V_{g,2} from the composed factors and from a direct fit
    gs = range(10, 19)
    np1 = {k: _fit_expansion(ratio_np1, k, gs, 3) for k in range(0, 4)}
    gm1 = {k: _fit_expansion(ratio_gm1, k, gs, 3) for k in range(0, 4)}
    composed = compose_ratio_expansion(0, 1, 2, 2, np1, gm1)
    direct = vandermonde_extrapolate(
        [(g, eval_real(PiLaurent.monomial(8 * g, 1) * volume(g, 1) / volume(g, 2))) for g in gs], 2
    )
    for i in range(2):
        assert abs(float(composed[i]) - float(direct.numeric(i))) < 5e-3 * (1 + abs(float(direct.numeric(i))))


# -- extrapolation -------------------------------------------------------------------


def test_extrapolate_exact_example():
    rep = vandermonde_extrapolate([(g, 1 + mpq(2, g)) for g in range(5, 10)], 1)
    assert rep.exact
    assert rep.coefficients == (PiLaurent.monomial(1), PiLaurent.monomial(2))
    assert all(float(s) == 0 for s in rep.spreads)


def test_extrapolate_numeric_example():
    samples = [(g, HighPrecisionReal.of(mpq(g, g + 1))) for g in range(20, 41)]
    rep = vandermonde_extrapolate(samples, 3)
    got = [float(rep.numeric(i)) for i in range(4)]
    assert abs(got[0] - 1) < 1e-5 and abs(got[1] + 1) < 1e-3
    assert abs(got[2] - 1) < 0.05 and abs(got[3] + 1) < 0.5
    early = vandermonde_extrapolate(samples[:8], 3)
    assert float(rep.spread(1)) < float(early.spread(1))
    assert rep.precision_bits == 256 and not rep.flagged


@settings(max_examples=25)
@given(st.integers(0, 5), st.lists(small_q, min_size=6, max_size=6), st.integers(2, 30))
def test_exact_recovery(s, cs, start):
    cs = cs[: s + 1]
    samples = [(g, sum(c * mpq(1, g) ** i for i, c in enumerate(cs))) for g in range(start, start + s + 4)]
    rep = vandermonde_extrapolate(samples, s)
    assert rep.coefficients == tuple(PiLaurent.monomial(c) if c else PiLaurent() for c in cs)
    assert all(float(x) == 0 for x in rep.spreads)


def test_extrapolate_errors():
    with pytest.raises(ValueError):
        vandermonde_extrapolate([(3, 1), (3, 2)], 1)
    with pytest.raises(DomainError):
        vandermonde_extrapolate([(3, 1)], 2)


def test_flagging_at_low_precision():
    samples = [(g, HighPrecisionReal.of(mpq(1, g), 64)) for g in range(200, 220)]
    assert vandermonde_extrapolate(samples, 8, 64).flagged


def test_np1_leading_coefficient_one():
    rep = vandermonde_extrapolate([(g, eval_real(ratio_np1(g, 1))) for g in range(8, 16)], 3)
    assert abs(float(rep.numeric(0)) - 1) < max(1e-4, 5 * float(rep.spread(0)))


def test_partial_product():
    c = lambda j: HighPrecisionReal.of(1 + mpq(1, j * j))
    c0, bs, rep = partial_product_extrapolate(c, (40, 60), 3)
    assert abs(float(c0) - float(mpmath.sinh(mpmath.pi) / mpmath.pi)) < 1e-6
    assert abs(float(bs[0]) + 1) < 1e-4


def test_regressor_facade():
    est = InverseGenusRegressor(order=2)
    g = np.arange(5, 12)
    est.fit(g, [1 + mpq(3, int(x)) - mpq(1, int(x) ** 2) for x in g])
    assert np.allclose(est.coef_, [1, 3, -1])
    assert np.all(est.spread_ == 0)
    assert np.allclose(est.predict([10]), [1.29])
    assert clone(est).get_params() == {"order": 2, "precision_bits": 256}
    est.fit(g.reshape(-1, 1), [1 + 2 / float(x) for x in g])
    assert abs(est.coef_[1] - 2) < 1e-9


# -- closed forms ---------------------------------------------------------------------


def test_formula_examples():
    assert e1_formula(1, (1,)) == PiLaurent.monomial(mpq(-1, 2), -1)
    assert e1_formula(2, (1, 1)) == PiLaurent.monomial(mpq(-9, 2), -1)
    assert e1_formula(2, (1, 0)) == PiLaurent.monomial(-1, -1)
    assert h1_formula(0) == PiLaurent({0: mpq(1, 4), -1: -2})
    assert b1_formula(0) == PiLaurent.monomial(3, -1)
    assert c1_formula(0) == PiLaurent({0: mpq(7, 12), -1: mpq(-17, 6)})
    with pytest.raises(DomainError):
        e1_formula(2, (0, 0))


def test_format_closed_form():
    assert format_closed_form(e1_formula(1, (1,))) == "−1/(2π²)"
    assert format_closed_form(h1_formula(0)) == "1/4 − 2/π²"


@settings(max_examples=60)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=6).filter(lambda d: sum(d) > 0))
def test_e1_nonzero_count_form(d):
    n, D = len(d), sum(d)
    nz = sum(1 for x in d if x)
    alt = -(D * D + (n - mpq(5, 2)) * D - mpq(nz * (2 * n - nz - 5), 4))
    assert e1_formula(n, tuple(d)) == (PiLaurent.monomial(alt, -1) if alt else PiLaurent())
    # depends on d only through |d| and the zero count
    shuffled = list(d)
    random.Random(D).shuffle(shuffled)
    assert e1_formula(n, tuple(shuffled)) == e1_formula(n, tuple(d))


@given(st.integers(0, 30))
def test_formula_exponents(n):
    assert set(h1_formula(n).exponents()) <= {0, -1}
    assert set(c1_formula(n).exponents()) <= {0, -1}
    assert set(b1_formula(n).exponents()) <= {-1}
    assert b1_formula(n) == PiLaurent.monomial(-(2 * n - 3), -1)


@settings(max_examples=30)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=4).filter(lambda d: sum(d) > 0))
def test_e1_exponent(d):
    v = e1_formula(len(d), tuple(d))
    assert v.is_zero() or v.exponents() == (-1,)


# -- decomposition and telescoping ----------------------------------------------------


def test_decomposition_example():
    parts = difference_decomposition(3, (1, 0))
    diff = (bracket(3, (1, 0)) - bracket(3, (2, 0))) / volume(3, 2)
    assert parts.total == diff


@pytest.mark.parametrize("g,k", [(2, (0, 0)), (3, (0, 1)), (4, (2, 1, 0)), (2, (1,)), (5, (0,)), (0, (0, 0, 0, 0))])
def test_decomposition_identity(g, k):
    up = (k[0] + 1,) + tuple(k[1:])
    diff = (bracket(g, k) - bracket(g, up)) / volume(g, len(k))
    assert difference_decomposition(g, k).total == diff


def test_decomposition_base_cases():
    with pytest.raises(DomainError):
        difference_decomposition(1, (0,))
    with pytest.raises(DomainError):
        difference_decomposition(0, (0, 0, 0))


@pytest.mark.parametrize("g,d", [(3, (2, 1)), (4, (0, 2, 1)), (2, (3,)), (5, (1, 1)), (3, (0, 0))])
def test_telescoping(g, d):
    assert lexicographic_sum(g, d) + ratio_tau(g, d) == PiLaurent.monomial(1)


def test_telescope_empty():
    assert lexicographic_sum(4, (0, 0, 0)).is_zero()


def test_v3_small():
    vals = [abs(float(eval_real(difference_decomposition(g, (1, 0)).V3 * g))) for g in range(4, 17)]
    assert max(vals[5:]) < 0.2 * max(vals[:3]) + 1e-3
    assert vals[-1] < vals[4]


def test_case_table():
    c = CONTRIBUTION_CASES["case1-n2-d10"]
    assert c.v1_limit == PiLaurent.monomial(3, -1) and c.v2_limit == PiLaurent.monomial(mpq(1, 2), -1)
    c = CONTRIBUTION_CASES["case2-n1-d1"]
    # combined Case 2 limit is (2|d| + n - 3/2)/pi^2
    assert c.total_limit == PiLaurent.monomial(2 + 1 - mpq(3, 2), -1)
