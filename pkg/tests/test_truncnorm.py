import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import stats

from nibridge.truncnorm import sample_truncnorm, truncnorm_ppf

finite = st.floats(-5, 5, allow_nan=False)


def test_matches_scipy_in_the_bulk():
    u = np.linspace(0.01, 0.99, 41)
    got = truncnorm_ppf(u, 0.3, 1.2, -1.0, 2.0)
    ref = stats.truncnorm.ppf(u, (-1.0 - 0.3) / 1.2, (2.0 - 0.3) / 1.2, loc=0.3, scale=1.2)
    assert np.max(np.abs(got - ref)) < 1e-10


def test_far_tail_stays_inside_window():
    u = np.linspace(0.0, 1.0, 11)
    x = truncnorm_ppf(u, 0.0, 1.0, 40.0, 41.0)
    assert np.all(np.isfinite(x))
    assert np.all((x >= 40.0) & (x <= 41.0))
    assert np.all(np.diff(x) >= 0)
    # one-sided tail: the conditional mean beyond alpha is close to alpha + 1/alpha
    xs = truncnorm_ppf(np.random.default_rng(0).random(20000), 0.0, 1.0, 30.0, np.inf)
    assert abs(xs.mean() - (30.0 + 1.0 / 30.0)) < 2e-3


def test_unbounded_is_plain_normal():
    u = np.array([0.1, 0.5, 0.9])
    assert np.allclose(truncnorm_ppf(u, 1.0, 2.0, -np.inf, np.inf), stats.norm.ppf(u, 1.0, 2.0))


def test_rejects_empty_window_and_bad_sd():
    with pytest.raises(ValueError):
        truncnorm_ppf(0.5, 0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        truncnorm_ppf(0.5, 0.0, 0.0, -1.0, 1.0)


def test_auto_method_uses_rejection_far_out():
    rng = np.random.default_rng(1)
    x = sample_truncnorm(rng, np.zeros(5000), 1.0, 8.0, np.inf, method="auto")
    assert np.all(x >= 8.0)
    ref = stats.truncnorm(8.0, np.inf)
    assert stats.kstest(x, ref.cdf).pvalue > 1e-3
    with pytest.raises(ValueError):
        sample_truncnorm(rng, 0.0, 1.0, 0.0, 1.0, method="other")


@settings(max_examples=200, deadline=None)
@given(u1=st.floats(0, 1), u2=st.floats(0, 1), mean=finite, d_mean=st.floats(0, 3),
       lo=finite, width=st.floats(0.01, 6), d_lo=st.floats(0, 3), d_hi=st.floats(0, 3))
def test_quantile_is_monotone_in_all_arguments(u1, u2, mean, d_mean, lo, width, d_lo, d_hi):
    hi = lo + width
    assume(lo + d_lo < hi + d_hi)
    ua, ub = min(u1, u2), max(u1, u2)
    a = truncnorm_ppf(ua, mean, 1.0, lo, hi)
    b = truncnorm_ppf(ub, mean + d_mean, 1.0, lo + d_lo, hi + d_hi)
    assert lo <= a <= hi
    assert b >= a - 1e-12


@settings(max_examples=100, deadline=None)
@given(u=st.floats(0, 1), mean=finite, lo=finite, width=st.floats(0.01, 6), c=st.floats(-4, 4))
def test_quantile_is_shift_equivariant(u, mean, lo, width, c):
    a = truncnorm_ppf(u, mean, 0.7, lo, lo + width)
    b = truncnorm_ppf(u, mean + c, 0.7, lo + c, lo + width + c)
    assert abs((b - c) - a) < 1e-9
