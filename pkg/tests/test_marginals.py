import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad

from carrytail.marginals import (
    DEFAULT_K_GRID,
    KsResult,
    LggdParams,
    ProfileTransformedParams,
    fit_lggd,
    fit_lognormal,
    ks_test,
    lggd_cdf,
    lggd_log_pdf,
    lggd_quantile,
)

STANDARD = LggdParams(1.0, 0.0, 1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        LggdParams(-1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        LggdParams(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        LggdParams(1.0, math.inf, 1.0)


def test_profile_transform_round_trip():
    p = ProfileTransformedParams(mu_tilde=0.4, sigma_tilde=0.7, k=3.0)
    nat = p.to_natural()
    assert nat.b == pytest.approx(0.7 * math.sqrt(3.0))
    assert nat.u == pytest.approx(0.4 - nat.b * math.log(3.0))


def test_log_pdf_pinned_values():
    # k=1, u=0, b=1 at y=0: k*0 - e^0 = -1
    assert lggd_log_pdf(0.0, STANDARD) == pytest.approx(-1.0)
    # y = u for general params: -1 - ln b - ln Gamma(k)
    p = LggdParams(3.5, 0.7, 2.0)
    assert lggd_log_pdf(0.7, p) == pytest.approx(
        -1.0 - math.log(2.0) - math.lgamma(3.5)
    )
    with pytest.raises(ValueError):
        lggd_log_pdf(math.nan, p)


def test_log_pdf_finite_for_extreme_y():
    p = LggdParams(2.0, 0.0, 1.0)
    for y in (-1e6, -750.0, 750.0, 1e6):
        assert np.isfinite(lggd_log_pdf(y, p))


def test_pdf_integrates_to_one_quadrature_oracle():
    val, _ = quad(lambda y: math.exp(lggd_log_pdf(y, LggdParams(2.0, 0.0, 1.0))), -40, 40)
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 5.0, 20.0])
@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("u", [-1.0, 0.0, 1.0])
def test_pdf_normalization_lattice(k, b, u):
    p = LggdParams(k, u, b)
    # adaptive range: quantiles far into both tails
    lo, hi = lggd_quantile(1e-12, p), lggd_quantile(1.0 - 1e-12, p)
    val, _ = quad(lambda y: math.exp(lggd_log_pdf(y, p)), lo, hi, limit=200)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_cdf_pinned_and_limits():
    assert lggd_cdf(0.0, STANDARD) == pytest.approx(1.0 - math.exp(-1.0))
    assert lggd_cdf(-1e8, STANDARD) == 0.0
    assert lggd_cdf(1e8, STANDARD) == 1.0


def test_cdf_weibull_special_case():
    # k=1, u=0, b=1: cdf(y) = 1 - exp(-e^y) exactly
    ys = np.linspace(-6.0, 3.0, 80)
    assert_allclose(lggd_cdf(ys, STANDARD), 1.0 - np.exp(-np.exp(ys)), atol=1e-14)


@given(
    y1=st.floats(-30, 30),
    y2=st.floats(-30, 30),
    k=st.floats(0.2, 50),
    b=st.floats(0.1, 5),
    u=st.floats(-3, 3),
)
@settings(max_examples=200, deadline=None)
def test_cdf_monotone_property(y1, y2, k, b, u):
    p = LggdParams(k, u, b)
    lo, hi = min(y1, y2), max(y1, y2)
    assert lggd_cdf(lo, p) <= lggd_cdf(hi, p)


def test_quantile_pinned_and_round_trips():
    assert lggd_quantile(0.5, STANDARD) == pytest.approx(math.log(math.log(2.0)))
    rng = np.random.default_rng(0)
    p = LggdParams(3.0, -0.5, 1.4)
    ys = rng.normal(-0.5, 2.0, 50)
    assert_allclose(lggd_quantile(lggd_cdf(ys, p), p), ys, atol=1e-8)
    qs = np.array([1e-6, 1e-3, 0.2, 0.5, 0.8, 1 - 1e-6])
    assert np.max(np.abs(lggd_cdf(lggd_quantile(qs, p), p) - qs)) < 1e-10
    with pytest.raises(ValueError):
        lggd_quantile(0.0, p)
    with pytest.raises(ValueError):
        lggd_quantile(1.0, p)


def test_quantile_deep_tail():
    p = LggdParams(2.0, 0.0, 1.0)
    y = lggd_quantile(1e-6, p)
    assert np.isfinite(y)
    assert lggd_cdf(y, p) == pytest.approx(1e-6, abs=1e-9)


# ---------------------------------------------------------------------------
# profile-likelihood MLE
# ---------------------------------------------------------------------------


def test_fit_recovers_truth():
    truth = LggdParams(2.0, 0.0, 1.0)
    y = lggd_quantile(np.random.default_rng(42).uniform(size=10_000), truth)
    fit = fit_lggd(y)
    assert abs(fit.params.u) < 0.05
    assert abs(fit.params.b - 1.0) < 0.05
    # profile equation residual at every grid k
    assert max(abs(g.residual) for g in fit.grid) < 1e-8
    # the selected k's likelihood within 2 of the truth's
    ll_truth = float(np.sum(lggd_log_pdf(y, truth)))
    assert fit.loglik >= ll_truth - 2.0


def test_fit_rejects_degenerate_and_short_samples():
    with pytest.raises(ValueError):
        fit_lggd(np.ones(100))
    with pytest.raises(ValueError):
        fit_lggd(np.arange(10.0))
    with pytest.raises(ValueError):
        fit_lggd(np.r_[np.zeros(30), np.nan])
    with pytest.raises(ValueError):
        fit_lggd(np.random.default_rng(0).normal(size=100), k_grid=[])


def test_fit_lognormal_limit_distributional():
    # LogNormal is the large-k limit: the fit should land at a large grid k
    # and match the empirical cdf closely
    y = np.random.default_rng(3).normal(0.0, 1.0, 10_000)
    fit = fit_lggd(y)
    assert fit.params.k >= DEFAULT_K_GRID[-10]
    ks = ks_test(y, lambda x: lggd_cdf(x, fit.params))
    assert ks.statistic < 0.02


def test_fit_nesting_sanity_vs_lognormal():
    y = np.random.default_rng(11).normal(0.3, 0.8, 5_000)
    fit = fit_lggd(y)
    mu, sd = fit_lognormal(y)
    k_max = float(DEFAULT_K_GRID[-1])
    b_eq = sd * math.sqrt(k_max)
    u_eq = mu - b_eq * math.log(k_max)
    ll_eq = float(np.sum(lggd_log_pdf(y, LggdParams(k_max, u_eq, b_eq))))
    assert fit.loglik / y.size >= ll_eq / y.size - 1e-4


def test_fit_lognormal_pinned_and_recovery():
    mu, sd = fit_lognormal([-1.0, 1.0])
    assert (mu, sd) == (0.0, 1.0)
    y = np.random.default_rng(1).normal(3.0, 2.0, 100_000)
    mu, sd = fit_lognormal(y)
    assert abs(mu - 3.0) < 0.02 and abs(sd - 2.0) < 0.02
    with pytest.raises(ValueError):
        fit_lognormal([1.0])
    with pytest.raises(ValueError):
        fit_lognormal([2.0, 2.0, 2.0])


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov
# ---------------------------------------------------------------------------


def test_ks_result_invariant():
    with pytest.raises(ValueError):
        KsResult(statistic=0.5, p_value=0.2, reject_at_5pct=True)


def test_ks_near_perfect_fit():
    n = 99
    x = np.arange(1, n + 1) / (n + 1)  # exactly at model quantiles
    r = ks_test(x, lambda v: np.clip(v, 0, 1))
    assert r.statistic <= 1 / (n + 1) + 1 / n
    assert not r.reject_at_5pct


def test_ks_maximal_mismatch():
    x = np.full(50, 0.01) + np.linspace(0, 1e-4, 50)
    r = ks_test(x, lambda v: np.clip(v, 0, 1) ** 8)  # cdf ~ 0 near the data
    assert r.statistic > 0.9
    assert r.reject_at_5pct


def test_ks_statistic_matches_scipy():
    from scipy.stats import kstest, norm

    rng = np.random.default_rng(7)
    x = rng.normal(size=400)
    ours = ks_test(x, lambda v: norm.cdf(v))
    ref = kstest(x, "norm")
    assert ours.statistic == pytest.approx(ref.statistic, abs=1e-12)
    assert ours.p_value == pytest.approx(ref.pvalue, abs=5e-3)


def test_ks_calibration_monte_carlo():
    # null is exactly true: rejection rate must sit near the nominal 5%
    rng = np.random.default_rng(5)
    rejections = 0
    trials = 400
    for _ in range(trials):
        x = rng.uniform(size=500)
        rejections += ks_test(x, lambda v: np.clip(v, 0.0, 1.0)).reject_at_5pct
    assert 0.02 <= rejections / trials <= 0.09
