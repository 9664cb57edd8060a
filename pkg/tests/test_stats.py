import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx
from scipy import integrate

from smokerisk.errors import DataError
from smokerisk.stats import mean_ci, paired_t_test, pearson, pearson_matrix, t_quantile, t_sf, t_two_sided_p
from smokerisk.table import ColumnSpec, Schema, Table


def t_pdf(x, df):
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def test_pearson_hand_example():
    # sum dx dy = 3, sxx = 2, syy = 42/9
    assert pearson(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 4.0])) == approx(3 / math.sqrt(2 * 42 / 9))


def test_pearson_pairwise_deletion_and_degenerate():
    x = np.array([1.0, 2.0, np.nan, 4.0])
    y = np.array([2.0, 4.0, 5.0, 8.0])
    assert pearson(x, y) == approx(1.0)
    assert math.isnan(pearson(np.array([1.0, 1.0, 1.0]), np.array([1.0, 2.0, 3.0])))
    assert math.isnan(pearson(np.array([1.0, np.nan]), np.array([np.nan, 2.0])))


def test_pearson_matrix(rng):
    n = 200
    a = rng.normal(size=n)
    cols = {"a": a, "b": -2 * a + 1, "c": rng.normal(size=n), "k": np.ones(n)}
    t = Table.from_arrays(Schema(tuple(ColumnSpec(k, "continuous") for k in cols)), cols)
    m = pearson_matrix(t)
    assert m.get("a", "b") == approx(-1.0)
    assert m.get("a", "c") == approx(np.corrcoef(a, cols["c"])[0, 1])
    assert math.isnan(m.get("a", "k")) and m.get("k", "k") == 1.0
    assert np.allclose(np.nan_to_num(m.r), np.nan_to_num(m.r.T))


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=40))
def test_pearson_bounded_and_symmetric(pairs):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    r = pearson(x, y)
    if not math.isnan(r):
        assert -1.0 <= r <= 1.0
        assert r == approx(pearson(y, x), abs=1e-12)


def test_paired_t_closed_form():
    # differences 1, 2, 3: mean 2, sd 1, t = 2 / (1 / sqrt 3)
    r = paired_t_test([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
    assert r.t_statistic == approx(2 * math.sqrt(3))
    assert r.t_statistic == approx(3.4641, abs=1e-4)
    assert r.df == 2
    # df = 2 has the closed-form tail 0.5 (1 - t / sqrt(t^2 + 2))
    t = r.t_statistic
    assert r.p_value == approx(1 - t / math.sqrt(t * t + 2), rel=1e-12)


def test_paired_t_degenerate():
    assert paired_t_test([1, 2], [1, 2]).p_value == 1.0
    r = paired_t_test([2, 3], [1, 2])
    assert r.p_value == 0.0 and math.isinf(r.t_statistic)
    with pytest.raises(DataError):
        paired_t_test([1.0], [2.0])
    with pytest.raises(DataError):
        paired_t_test([1.0, 2.0], [2.0])


@pytest.mark.parametrize("df", [1, 2, 3.5, 9, 30])
@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 2.5, 6.0])
def test_t_sf_matches_quadrature(t, df):
    expected, _ = integrate.quad(t_pdf, t, math.inf, args=(df,), epsabs=1e-13, epsrel=1e-12)
    assert t_sf(t, df) == approx(expected, abs=1e-10)
    assert t_sf(-t, df) == approx(1 - expected, abs=1e-10)


def test_t_two_sided_p_cauchy():
    # df = 1 is Cauchy: P(|T| > 1) = 1/2
    assert t_two_sided_p(1.0, 1) == approx(0.5)
    assert t_two_sided_p(math.inf, 4) == 0.0


def test_t_quantile_inverts_sf():
    for q in (0.9, 0.975, 0.995):
        assert 1 - t_sf(t_quantile(q, 7), 7) == approx(q, rel=1e-10)


def test_mean_ci_hand_example():
    iv = mean_ci([1, 2, 3, 4, 5])
    # t_{0.975, 4} = 2.7764451051977987
    half = 2.7764451051977987 * math.sqrt(2.5) / math.sqrt(5)
    assert (iv.mean, iv.lower, iv.upper) == approx((3.0, 3 - half, 3 + half))
    assert iv.sd == approx(math.sqrt(2.5))
    with pytest.raises(DataError):
        mean_ci([1.0])
