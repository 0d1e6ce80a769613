import json
from itertools import product

import mpmath
import pytest
from gmpy2 import mpq
from hypothesis import given, settings
from hypothesis import strategies as st

from wpvol.errors import DomainError
from wpvol.exact import B0, PiLaurent, eval_real, hyperbolic_w_sum
from wpvol.intersection import bracket, kappa_psi_integral
from wpvol.volumes import (
    VolumeTable,
    build_table,
    evaluate_volume,
    kimura_ratio,
    ratio_gm1,
    ratio_gp1,
    ratio_np1,
    ratio_tau,
    sinh_bound_check,
    table_export,
    table_import,
    verify_pde1,
    verify_pde2,
    volume,
    volume_polynomial,
    zograf_ratio,
)

PI = mpmath.pi


def _stable(gmax, nmax, nmin=0):
    return [(g, n) for g in range(gmax + 1) for n in range(nmin, nmax + 1) if 2 * g - 2 + n > 0]


# classical closed forms in true boundary lengths
CLASSICAL = {
    (1, 1): lambda b: (b[0] ** 2 + 4 * PI**2) / 48,
    (0, 4): lambda b: (4 * PI**2 + sum(x**2 for x in b)) / 2,
    (1, 2): lambda b: (4 * PI**2 + b[0] ** 2 + b[1] ** 2) * (12 * PI**2 + b[0] ** 2 + b[1] ** 2) / 192,
    (2, 1): lambda b: (4 * PI**2 + b[0] ** 2)
    * (12 * PI**2 + b[0] ** 2)
    * (6960 * PI**4 + 384 * PI**2 * b[0] ** 2 + 5 * b[0] ** 4)
    / 2211840,
}


# -- constants ------------------------------------------------------------------


@pytest.mark.parametrize(
    "g,n,q,e",
    [
        (0, 3, 1, 0),
        (1, 2, mpq(1, 4), 2),
        (2, 0, mpq(43, 2160), 3),
        (0, 4, 2, 1),
        (1, 1, mpq(1, 12), 1),
        (0, 5, 10, 2),
        (1, 3, mpq(14, 9), 3),
        (3, 0, mpq(176557, 1209600), 6),
    ],
)
def test_volume_values(g, n, q, e):
    assert volume(g, n) == PiLaurent.monomial(q, e)


def test_volume_12_via_kappa_integral():
    # V = (2 pi^2)^2 / 2! * int kappa_1^2 on M(1,2)
    assert kappa_psi_integral(1, (0, 0)) == mpq(1, 8)


@pytest.mark.parametrize("g,n", [(0, 2), (1, 0), (0, 0), (-1, 4)])
def test_volume_unstable(g, n):
    with pytest.raises(DomainError):
        volume(g, n)


@pytest.mark.parametrize("g,n", _stable(6, 4))
def test_volume_homogeneous_positive(g, n):
    v = volume(g, n)
    q, e = v.as_monomial()
    assert q > 0 and e == 3 * g - 3 + n


# -- polynomials ------------------------------------------------------------------


def test_polynomial_examples():
    p = volume_polynomial(1, 1)
    assert p.coefficient((0,)) == PiLaurent.monomial(mpq(1, 12), 1)
    assert p.coefficient((1,)) == PiLaurent.monomial(mpq(1, 12))
    assert len(p) == 2
    q = volume_polynomial(0, 4)
    assert q.constant_term == PiLaurent.monomial(2, 1)
    for i in range(4):
        d = [0] * 4
        d[i] = 1
        assert q.coefficient(d) == PiLaurent.monomial(2)


@pytest.mark.parametrize("gn", sorted(CLASSICAL))
def test_polynomials_match_classical_forms(gn):
    g, n = gn
    poly = volume_polynomial(g, n)
    for b in product([0, 1, mpmath.mpf(7) / 3, 5], repeat=n):
        got = evaluate_volume(poly, b, 256).value
        with mpmath.workprec(256):
            want = CLASSICAL[gn](list(map(mpmath.mpf, b)))
            assert abs(got / want - 1) < mpmath.mpf(2) ** -200


def test_evaluate_examples():
    v11 = volume_polynomial(1, 1)
    assert abs(float(evaluate_volume(v11, [0])) - 0.822467) < 1e-6
    assert abs(float(evaluate_volume(v11, [2 * mpmath.pi])) - 1.644934) < 1e-6
    assert abs(float(evaluate_volume(volume_polynomial(0, 4), [0] * 4)) - 19.7392) < 1e-4
    with pytest.raises(DomainError):
        evaluate_volume(v11, [-1])
    with pytest.raises(DomainError):
        evaluate_volume(v11, [1, 2])


@pytest.mark.parametrize("g,n", _stable(4, 3, nmin=1))
def test_polynomial_constant_and_positivity(g, n):
    p = volume_polynomial(g, n)
    assert p.constant_term == volume(g, n)
    for d, c in p.coefficients():
        q, e = c.as_monomial()
        assert q > 0 and e == 3 * g - 3 + n - sum(d)
    assert p.coefficient((9,) * n).is_zero() or 9 * n <= 3 * g - 3 + n


@settings(max_examples=30)
@given(st.lists(st.floats(0, 12), min_size=2, max_size=2), st.integers(0, 1), st.floats(0.01, 3))
def test_monotone_in_each_length(b, i, bump):
    p = volume_polynomial(1, 2)
    up = list(b)
    up[i] += bump
    assert evaluate_volume(p, up).value > evaluate_volume(p, b).value


def test_polynomial_needs_boundary():
    with pytest.raises(DomainError):
        volume_polynomial(2, 0)


# -- ratios ---------------------------------------------------------------------------


def test_ratio_examples():
    assert ratio_tau(4, (0, 0)) == PiLaurent.monomial(1)
    assert ratio_np1(1, 1) == PiLaurent.monomial(mpq(4, 3))
    assert ratio_gm1(2, 0) * volume(2, 0) == volume(1, 2)
    assert ratio_gp1(1, 1) * volume(1, 1) == volume(2, 1)
    with pytest.raises(DomainError):
        ratio_gm1(0, 4)


@pytest.mark.parametrize("g,d", [(3, (2,)), (4, (1, 1)), (5, (3, 0, 0))])
def test_ratio_tau_exponent(g, d):
    assert ratio_tau(g, d).exponents() == (-sum(d),)


@pytest.mark.parametrize("g,n", _stable(8, 4))
def test_np1_bounds(g, n):
    r = float(eval_real(ratio_np1(g, n)))
    assert float(eval_real(B0)) < r < float(hyperbolic_w_sum())


@pytest.mark.parametrize("g,n", [(g, n) for g, n in _stable(8, 4) if g >= 1])
def test_genus_drop_inequality(g, n):
    # the bound the recursion-I argument delivers: two extra points on each side
    assert eval_real(volume(g - 1, n + 4)) <= eval_real(volume(g, n + 2))


def test_genus_drop_without_extra_points_is_false():
    # comparing against V_{g,n} itself fails already at the smallest keys
    assert eval_real(volume(0, 5)) > eval_real(volume(1, 1))
    assert eval_real(volume(7, 4)) > eval_real(volume(8, 0))


def test_split_sum_trend():
    # g * sum V_{g1,n1+1} V_{g2,n2+1} / V_{g,n1+n2} stays bounded
    for n1, n2 in [(0, 0), (1, 0), (1, 1)]:
        vals = []
        for g in range(3, 14):
            tot = 0
            for g1 in range(g + 1):
                g2 = g - g1
                if 2 * g1 - 1 + n1 > 0 and 2 * g2 - 1 + n2 > 0:
                    tot += eval_real(volume(g1, n1 + 1)).value * eval_real(volume(g2, n2 + 1)).value
            vals.append(float(g * tot / eval_real(volume(g, n1 + n2)).value))
        assert all(v > 0 for v in vals)
        assert vals[-1] < 2 * vals[len(vals) // 2]


# -- large-genus normalised ratios --------------------------------------------------------


def test_normalised_ratio_small_and_trend():
    z11 = zograf_ratio(1, 1)
    with mpmath.workprec(256):
        assert abs(z11.value - PI**2 / 12) < mpmath.mpf(2) ** -240
    vals = [float(zograf_ratio(g, 1)) for g in range(5, 21)]
    steps = [abs(b - a) for a, b in zip(vals, vals[1:])]
    assert all(b < a for a, b in zip(steps, steps[1:]))
    assert abs(vals[-1] - 1 / mpmath.sqrt(PI)) < 0.02


def test_normalised_ratio_domain():
    with pytest.raises(DomainError):
        zograf_ratio(0, 3)


def test_sinh_ratio_at_zero_matches_normalised():
    for g in (6, 12, 18):
        k = kimura_ratio(g, 1, [0])
        z = zograf_ratio(g, 1)
        # ratio of normalisations tends to sqrt(pi)
        assert abs(float(k.value / z.value) / float(mpmath.sqrt(PI)) - 1) < 2.0 / g


def test_sinh_ratio_flattens():
    vals = [float(kimura_ratio(g, 2, [1, 2])) for g in range(5, 21)]
    steps = [abs(b - a) for a, b in zip(vals, vals[1:])]
    assert steps[-1] < steps[0] / 4


# -- sinh bounds ----------------------------------------------------------------------------


def test_sinh_examples():
    r = sinh_bound_check(3, 2, [0, 0])
    assert r.upper_ok and abs(float(r.ratio) - 1) < 1e-30
    assert sinh_bound_check(1, 1, [1]).upper_ok


@pytest.mark.parametrize("g,n", _stable(5, 3, nmin=1))
def test_sinh_upper_bound(g, n):
    for b in product([0, 1, 3, 6], repeat=n):
        assert sinh_bound_check(g, n, b).upper_ok


def test_implied_c_bounded():
    cs = [float(sinh_bound_check(g, 2, [1, 2]).implied_c) for g in range(2, 16)]
    assert all(c > 0 for c in cs)
    assert max(cs) < 10 * min(cs)


# -- PDEs -------------------------------------------------------------------------------------


@pytest.mark.parametrize("g,n", [(g, n) for g, n in _stable(5, 10) if 2 * g + n <= 10])
def test_pde1(g, n):
    r = verify_pde1(g, n)
    assert r.passed, r.summary()


def test_pde1_examples():
    assert verify_pde1(1, 1).passed and verify_pde1(0, 4).passed
    # at L = 0 the identity reads sum_k (-1)^(k+1) k pi^(2k-2) c_k = 2(2g-2+n) V_{g,n}
    p = volume_polynomial(1, 2)
    lhs = PiLaurent()
    for k in range(0, 3):
        c = p.coefficient((0, k))
        if k:
            lhs = lhs + c.shift(k - 1) * ((-1) ** (k + 1) * k)
    assert lhs == 2 * volume(1, 1)


@pytest.mark.parametrize("g,n", [(g, n) for g, n in _stable(5, 10) if 2 * g + n <= 10])
def test_pde2_with_reversed_sign(g, n):
    assert verify_pde2(g, n, sign=-1).passed


def test_pde2_as_written():
    # holds only where the (4g-4+n) term vanishes
    assert verify_pde2(0, 4).passed
    assert not verify_pde2(1, 1).passed
    assert "b_j = L_j" in verify_pde2(1, 1).note


# -- tables ---------------------------------------------------------------------------------------


def test_table_csv_round_trip():
    t = build_table(range(0, 7), range(0, 4))
    text = table_export(t, "csv")
    lines = text.strip().split("\n")
    assert lines[0].split(",") == ["g", "n", "value"]
    assert len(lines) - 1 == len(_stable(6, 3))
    back = table_import(text)
    assert back == t
    assert set(back.provenance.values()) == {"loaded"}


def test_table_json_round_trip():
    t = build_table(range(0, 4), range(0, 3))
    text = table_export(t, "json")
    doc = json.loads(text)
    assert doc["wpvol"] == 1
    assert table_import(text) == t
    del doc["wpvol"]
    with pytest.raises(ValueError):
        table_import(json.dumps(doc))


def test_table_import_names_row():
    t = build_table([1, 2], [1])
    text = table_export(t, "csv").replace("1:1/12", "2:1/12")
    with pytest.raises(ValueError, match="row"):
        table_import(text)


def test_table_decimal_column():
    t = build_table([1], [1])
    text = table_export(t, "csv", decimal=True)
    assert "0.822467" in text


def test_empty_table():
    assert table_import(table_export(VolumeTable(), "csv")) == VolumeTable()


def test_brackets_feed_polynomial():
    # coefficient equals bracket divided by factorials
    p = volume_polynomial(2, 2)
    assert p.coefficient((2, 1)) * 120 * 6 == bracket(2, (2, 1))
