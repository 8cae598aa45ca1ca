import math

import mpmath as mp
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import kendalltau, kstest

from carrytail.copulas import (
    CopulaSpec,
    Family,
    MixtureSpec,
    adk_coefficients,
    clamp_counter,
    copula_cdf,
    copula_log_density,
    generator,
    generator_deriv,
    inverse_generator,
    kendall_tau,
    mixture_log_density,
    polylog_neg_int,
    sample,
    spec_from_dict,
)

mp.mp.dps = 50

REFERENCE_SPECS = [
    CopulaSpec(Family.CLAYTON, 2.0),
    CopulaSpec(Family.FRANK, 3.0),
    CopulaSpec(Family.GUMBEL, 2.5),
    CopulaSpec(Family.OP_CLAYTON, 2.0, 1.7),
]


def mp_generator(spec):
    """Generator re-expressed in mpmath arithmetic: the derivative oracle."""
    rho, beta = mp.mpf(spec.rho), mp.mpf(spec.beta)
    if spec.family is Family.CLAYTON:
        return lambda t: (1 + t) ** (-1 / rho)
    if spec.family is Family.GUMBEL:
        return lambda t: mp.e ** (-(t ** (1 / rho)))
    if spec.family is Family.FRANK:
        return lambda t: -mp.log(1 - mp.e ** (-t) * (1 - mp.e ** (-rho))) / rho
    return lambda t: (1 + t ** (1 / beta)) ** (-1 / rho)


def mp_deriv(spec, t, d):
    return float(mp.diff(mp_generator(spec), mp.mpf(t), d, method="step"))


# ---------------------------------------------------------------------------
# specs and serialization
# ---------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        CopulaSpec(Family.CLAYTON, -1.0)
    with pytest.raises(ValueError):
        CopulaSpec(Family.GUMBEL, 0.9)
    with pytest.raises(ValueError):
        CopulaSpec(Family.FRANK, 0.0)
    with pytest.raises(ValueError):
        CopulaSpec(Family.OP_CLAYTON, 2.0, 0.5)
    CopulaSpec(Family.FRANK, -4.0)  # negative Frank rho is legal


def test_mixture_validation():
    c = CopulaSpec(Family.CLAYTON, 1.0)
    with pytest.raises(ValueError):
        MixtureSpec(((c, 0.5), (c, 0.6)))
    with pytest.raises(ValueError):
        MixtureSpec(((c, -0.1), (c, 1.1)))
    m = MixtureSpec(((c, 0.25), (CopulaSpec(Family.GUMBEL, 2.0), 0.75)))
    assert_allclose(m.weights, [0.25, 0.75])


def test_json_round_trip():
    spec = CopulaSpec(Family.OP_CLAYTON, 2.0, 1.5)
    assert spec_from_dict(spec.to_dict()) == spec
    mix = MixtureSpec(
        ((CopulaSpec(Family.CLAYTON, 2.0), 0.4), (CopulaSpec(Family.FRANK, 3.0), 0.6))
    )
    assert spec_from_dict(mix.to_dict()) == mix


# ---------------------------------------------------------------------------
# generators and inverses
# ---------------------------------------------------------------------------


def test_generator_pinned_values():
    assert generator(CopulaSpec(Family.CLAYTON, 1.0), 1.0) == pytest.approx(0.5)
    t0 = 1.37
    assert generator(CopulaSpec(Family.GUMBEL, 1.0), t0) == pytest.approx(math.exp(-t0))
    assert generator(CopulaSpec(Family.FRANK, 1.0), 0.0) == pytest.approx(1.0)
    assert inverse_generator(CopulaSpec(Family.CLAYTON, 2.0), 0.5) == pytest.approx(3.0)
    assert inverse_generator(CopulaSpec(Family.OP_CLAYTON, 2.0, 2.0), 0.5) == pytest.approx(9.0)


@pytest.mark.parametrize("spec", REFERENCE_SPECS + [CopulaSpec(Family.FRANK, -3.0)])
def test_generator_round_trip(spec):
    s = np.geomspace(1e-10, 1.0, 40)
    s[-1] = 1.0 - 1e-10
    back = generator(spec, inverse_generator(spec, s))
    assert_allclose(back, s, rtol=1e-12)


@pytest.mark.parametrize("spec", REFERENCE_SPECS)
def test_generator_limits_and_monotonicity(spec):
    assert generator(spec, 0.0) == pytest.approx(1.0)
    t = np.geomspace(1e-8, 50.0, 60)
    vals = generator(spec, t)
    assert np.all(np.diff(vals) < 0)
    assert generator(spec, 1e12) < 0.01  # power-law families decay slowly


# ---------------------------------------------------------------------------
# a_dk coefficients, polylogarithms, derivatives
# ---------------------------------------------------------------------------


def test_adk_pinned():
    assert_allclose(adk_coefficients(1, 0.5), [0.5])
    assert_allclose(adk_coefficients(2, 0.5), [0.25, 0.25])
    for d in range(1, 9):
        for alpha in (0.2, 0.5, 0.9, 1.0):
            assert adk_coefficients(d, alpha)[-1] == pytest.approx(alpha**d)


def test_adk_alpha_one_reduces_to_exponential():
    # alpha=1 keeps only the top coefficient, so the Gumbel rho=1 derivative
    # column collapses to the derivatives of exp(-t)
    for d in range(1, 9):
        a = adk_coefficients(d, 1.0)
        assert_allclose(a[:-1], np.zeros(d - 1), atol=1e-9)
        assert a[-1] == pytest.approx(1.0)
        g1 = CopulaSpec(Family.GUMBEL, 1.0)
        assert generator_deriv(g1, 1.3, d) == pytest.approx(
            (-1.0) ** d * math.exp(-1.3), rel=1e-9
        )


def test_polylog_pinned_and_series_oracle():
    assert polylog_neg_int(0, 0.5) == pytest.approx(1.0)
    assert polylog_neg_int(1, 0.5) == pytest.approx(2.0)
    z = 0.3
    for n in range(6):
        series = sum(k**n * z**k for k in range(1, 201))
        assert polylog_neg_int(n, z) == pytest.approx(series, abs=1e-10)
    with pytest.raises(ValueError):
        polylog_neg_int(1, 1.0)
    with pytest.raises(ValueError):
        polylog_neg_int(1, -1.5)


@pytest.mark.parametrize("spec", REFERENCE_SPECS)
def test_generator_deriv_vs_mpmath(spec):
    for t in (0.1, 1.0, 5.0):
        for d in range(1, 9):
            exact = generator_deriv(spec, t, d)
            oracle = mp_deriv(spec, t, d)
            assert exact == pytest.approx(oracle, rel=1e-9), (spec, t, d)


def test_generator_deriv_frank_negative_rho():
    spec = CopulaSpec(Family.FRANK, -3.0)
    for t in (0.1, 1.0, 5.0):
        for d in (1, 2):
            assert generator_deriv(spec, t, d) == pytest.approx(
                mp_deriv(spec, t, d), rel=1e-9
            )
    # closed-form cross-check: d=2 equals (1/rho) Li_{-1}(z), z/(1-z)^2
    rho, t = -3.0, 0.7
    z = (1 - math.exp(-rho)) * math.exp(-t)
    expected = z / (1 - z) ** 2 / rho
    assert generator_deriv(spec, t, 2) == pytest.approx(expected, rel=1e-12)


def test_generator_deriv_pinned_and_signs():
    assert generator_deriv(CopulaSpec(Family.CLAYTON, 1.0), 1.0, 1) == pytest.approx(-0.25)
    for spec in REFERENCE_SPECS:
        for d in range(1, 9):
            for t in (0.2, 1.0, 7.0):
                val = generator_deriv(spec, t, d)
                assert (-1.0) ** d * val > 0, (spec, d, t, val)
    with pytest.raises(ValueError):
        generator_deriv(REFERENCE_SPECS[0], 1.0, 0)
    with pytest.raises(ValueError):
        generator_deriv(REFERENCE_SPECS[0], 1.0, 9)


def _partitions(n, max_part=None):
    """Integer partitions as multiplicity dicts {part: count}."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield {}
        return
    for part in range(min(n, max_part), 0, -1):
        for rest in _partitions(n - part, part):
            out = dict(rest)
            out[part] = out.get(part, 0) + 1
            yield out


def test_op_clayton_deriv_vs_bell_polynomial_composition():
    """Faa di Bruno oracle: compose Clayton derivatives with the derivatives
    of t^(1/beta) over integer partitions and compare with the closed form."""
    rho, beta = 2.0, 1.7
    alpha = 1.0 / beta
    op = CopulaSpec(Family.OP_CLAYTON, rho, beta)
    base = CopulaSpec(Family.CLAYTON, rho)

    def g_deriv(i, t):  # i-th derivative of t^alpha
        coeff = 1.0
        for j in range(i):
            coeff *= alpha - j
        return coeff * t ** (alpha - i)

    for t in (0.3, 1.0, 4.0):
        for d in range(1, 7):
            total = 0.0
            for part in _partitions(d):
                m = sum(part.values())
                weight = math.factorial(d)
                prod = 1.0
                for size, count in part.items():
                    weight /= math.factorial(count) * math.factorial(size) ** count
                    prod *= g_deriv(size, t) ** count
                total += generator_deriv(base, t**alpha, m) * weight * prod
            assert generator_deriv(op, t, d) == pytest.approx(total, rel=1e-9), (t, d)


# ---------------------------------------------------------------------------
# CDF and densities
# ---------------------------------------------------------------------------


def test_cdf_pinned_values():
    assert copula_cdf(CopulaSpec(Family.GUMBEL, 1.0), [0.3, 0.7]) == pytest.approx(0.21)
    assert copula_cdf(CopulaSpec(Family.CLAYTON, 2.0), [0.5, 0.5]) == pytest.approx(
        7.0**-0.5
    )


@pytest.mark.parametrize("spec", REFERENCE_SPECS)
def test_cdf_bounds_and_margin_consistency(spec):
    rng = np.random.default_rng(0)
    u = rng.uniform(0.05, 0.95, size=(50, 3))
    c = copula_cdf(spec, u)
    assert np.all(c >= np.maximum(u.sum(axis=1) - 2, 0) - 1e-12)
    assert np.all(c <= u.min(axis=1) + 1e-12)
    # setting one coordinate to ~1 marginalizes it away
    u2 = u.copy()
    u2[:, 2] = 1 - 1e-9
    c2 = copula_cdf(spec, u2)
    c_marg = copula_cdf(spec, u[:, :2])
    assert_allclose(c2, c_marg, atol=1e-6)


def test_log_density_pinned_values():
    c2 = CopulaSpec(Family.CLAYTON, 2.0)
    dens = 3.0 * 0.25**-3.0 * 7.0**-2.5
    assert copula_log_density(c2, [0.5, 0.5]) == pytest.approx(math.log(dens))
    assert dens == pytest.approx(1.48101, abs=1e-5)
    assert copula_log_density(CopulaSpec(Family.GUMBEL, 1.0), [0.37, 0.81]) == pytest.approx(
        0.0, abs=1e-12
    )


def test_clayton_density_closed_form_grid():
    # independent bivariate formula: (1+rho)(uv)^-(1+rho) (u^-rho+v^-rho-1)^-(2+1/rho)
    rho = 2.0
    spec = CopulaSpec(Family.CLAYTON, rho)
    rng = np.random.default_rng(1)
    uv = rng.uniform(0.02, 0.98, size=(200, 2))
    expected = np.log(
        (1 + rho)
        * (uv[:, 0] * uv[:, 1]) ** (-(1 + rho))
        * (uv[:, 0] ** -rho + uv[:, 1] ** -rho - 1) ** (-(2 + 1 / rho))
    )
    assert_allclose(copula_log_density(spec, uv), expected, rtol=1e-10)


@pytest.mark.parametrize("spec", REFERENCE_SPECS + [CopulaSpec(Family.FRANK, -3.0)])
def test_density_matches_mixed_differences_of_cdf(spec):
    # exp(log density) ~ d2 C / du dv by central mixed differences
    h = 1e-4
    for point in ([0.3, 0.6], [0.5, 0.5], [0.75, 0.2]):
        u, v = point
        mixed = (
            copula_cdf(spec, [u + h, v + h])
            - copula_cdf(spec, [u + h, v - h])
            - copula_cdf(spec, [u - h, v + h])
            + copula_cdf(spec, [u - h, v - h])
        ) / (4 * h * h)
        dens = math.exp(copula_log_density(spec, point))
        assert dens == pytest.approx(mixed, rel=1e-3), (spec, point)


@pytest.mark.parametrize("spec", REFERENCE_SPECS)
@pytest.mark.parametrize("d", [2, 3, 5, 8])
def test_density_exchangeable(spec, d):
    rng = np.random.default_rng(2)
    u = rng.uniform(0.05, 0.95, size=d)
    base = copula_log_density(spec, u)
    for _ in range(4):
        perm = rng.permutation(d)
        assert copula_log_density(spec, u[perm]) == pytest.approx(base, rel=1e-12)


def test_frank_negative_rho_needs_dim_two():
    spec = CopulaSpec(Family.FRANK, -3.0)
    with pytest.raises(ValueError):
        copula_log_density(spec, [0.3, 0.4, 0.5])


def test_dimension_limits():
    spec = CopulaSpec(Family.CLAYTON, 1.0)
    with pytest.raises(ValueError):
        copula_log_density(spec, np.full(9, 0.5))
    with pytest.raises(ValueError):
        copula_log_density(spec, np.full(1, 0.5))
    with pytest.raises(ValueError):
        copula_log_density(spec, [0.5, 1.5])


def test_clamp_counter_increments():
    clamp_counter.reset()
    spec = CopulaSpec(Family.CLAYTON, 1.0)
    pts = np.array([[1e-14, 0.5], [0.5, 1 - 1e-14]])
    copula_log_density(spec, pts)
    assert clamp_counter.count == 2
    clamp_counter.reset()


def test_mixture_degenerate_and_pinned():
    c2 = CopulaSpec(Family.CLAYTON, 2.0)
    f = CopulaSpec(Family.FRANK, 3.0)
    g = CopulaSpec(Family.GUMBEL, 2.0)
    mix = MixtureSpec(((c2, 1.0), (f, 0.0), (g, 0.0)))
    pts = np.random.default_rng(3).uniform(0.1, 0.9, size=(20, 2))
    assert_allclose(mixture_log_density(mix, pts), copula_log_density(c2, pts), rtol=0)
    # pinned composite: 0.5 * clayton + 0.5 * independence-gumbel
    mix2 = MixtureSpec(((c2, 0.5), (f, 0.0), (CopulaSpec(Family.GUMBEL, 1.0), 0.5)))
    clayton_dens = 3.0 * 0.25**-3.0 * 7.0**-2.5  # ~1.48101
    expected = 0.5 * clayton_dens + 0.5
    assert mixture_log_density(mix2, [0.5, 0.5]) == pytest.approx(
        math.log(expected), rel=1e-12
    )
    assert expected == pytest.approx(1.24051, abs=1e-4)


def test_mixture_density_linear_in_weights():
    c2 = CopulaSpec(Family.CLAYTON, 2.0)
    g = CopulaSpec(Family.GUMBEL, 1.8)
    rng = np.random.default_rng(4)
    pts = rng.uniform(0.05, 0.95, size=(50, 3))
    dens_c = np.exp(copula_log_density(c2, pts))
    dens_g = np.exp(copula_log_density(g, pts))
    for lam in (0.0, 0.2, 0.5, 0.9, 1.0):
        mix = MixtureSpec(((c2, lam), (g, 1.0 - lam)))
        got = np.exp(mixture_log_density(mix, pts))
        assert_allclose(got, lam * dens_c + (1 - lam) * dens_g, rtol=1e-12)


def test_frank_independence_limit_guard():
    mix = MixtureSpec(
        (
            (CopulaSpec(Family.CLAYTON, 1e-9), 1 / 3),
            (CopulaSpec(Family.FRANK, 1e-9), 1 / 3),
            (CopulaSpec(Family.GUMBEL, 1.0), 1 / 3),
        )
    )
    val = mixture_log_density(mix, [0.4, 0.7])
    assert val == pytest.approx(0.0, abs=1e-6)


def test_op_clayton_beta_one_equals_clayton():
    rho = 2.0
    op = CopulaSpec(Family.OP_CLAYTON, rho, 1.0)
    cl = CopulaSpec(Family.CLAYTON, rho)
    rng = np.random.default_rng(5)
    pts = rng.uniform(0.02, 0.98, size=(100, 3))
    assert_allclose(copula_cdf(op, pts), copula_cdf(cl, pts), rtol=1e-10)
    assert_allclose(
        copula_log_density(op, pts), copula_log_density(cl, pts), rtol=1e-10
    )
    for d in range(1, 9):
        assert generator_deriv(op, 1.3, d) == pytest.approx(
            generator_deriv(cl, 1.3, d), rel=1e-10
        )


def test_density_normalizes_bivariate_quadrature():
    # light version of the acceptance quadrature: 80-node Gauss-Legendre
    nodes, weights = np.polynomial.legendre.leggauss(80)
    x = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    uu, vv = np.meshgrid(x, x)
    pts = np.column_stack([uu.ravel(), vv.ravel()])
    ww = np.outer(w, w).ravel()
    for spec in [CopulaSpec(Family.CLAYTON, 2.0), CopulaSpec(Family.FRANK, 3.0)]:
        integral = float(np.dot(ww, np.exp(copula_log_density(spec, pts))))
        assert integral == pytest.approx(1.0, abs=2e-3), spec


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def test_sampling_deterministic_per_seed():
    spec = CopulaSpec(Family.GUMBEL, 2.0)
    a = sample(spec, 100, 3, rng_seed=9)
    b = sample(spec, 100, 3, rng_seed=9)
    assert np.array_equal(a, b)
    c = sample(spec, 100, 3, rng_seed=10)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize(
    "spec",
    REFERENCE_SPECS
    + [
        CopulaSpec(Family.GUMBEL, 1.0),
        CopulaSpec(Family.CLAYTON, 0.5),
        CopulaSpec(Family.FRANK, 25.0),
    ],
)
def test_sampling_margins_uniform(spec):
    u = sample(spec, 100_000, 3, rng_seed=21)
    assert u.shape == (100_000, 3)
    for j in range(3):
        assert kstest(u[:, j], "uniform").pvalue > 0.01, (spec, j)


def test_sampling_tau_matches_closed_form():
    cases = [
        CopulaSpec(Family.GUMBEL, 1.0),
        CopulaSpec(Family.CLAYTON, 2.0),
        CopulaSpec(Family.FRANK, 4.0),
        CopulaSpec(Family.FRANK, -3.0),
        CopulaSpec(Family.OP_CLAYTON, 2.0, 2.0),
    ]
    for spec in cases:
        u = sample(spec, 50_000, 2, rng_seed=33)
        tau_hat = kendalltau(u[:, 0], u[:, 1]).statistic
        assert tau_hat == pytest.approx(kendall_tau(spec), abs=0.015), spec


def test_frank_negative_rho_multivariate_rejected():
    with pytest.raises(ValueError):
        sample(CopulaSpec(Family.FRANK, -2.0), 100, 3, rng_seed=0)


def test_mixture_sampling_margins_and_determinism():
    mix = MixtureSpec(
        (
            (CopulaSpec(Family.CLAYTON, 2.0), 0.4),
            (CopulaSpec(Family.FRANK, 3.0), 0.2),
            (CopulaSpec(Family.GUMBEL, 2.0), 0.4),
        )
    )
    u = sample(mix, 60_000, 4, rng_seed=77)
    for j in range(4):
        assert kstest(u[:, j], "uniform").pvalue > 0.01
    assert np.array_equal(u, sample(mix, 60_000, 4, rng_seed=77))


# ---------------------------------------------------------------------------
# Kendall's tau
# ---------------------------------------------------------------------------


def test_kendall_tau_closed_forms():
    assert kendall_tau(CopulaSpec(Family.CLAYTON, 2.0)) == pytest.approx(0.5)
    assert kendall_tau(CopulaSpec(Family.GUMBEL, 1.0)) == pytest.approx(0.0)
    assert kendall_tau(CopulaSpec(Family.GUMBEL, 4.0)) == pytest.approx(0.75)
    assert kendall_tau(CopulaSpec(Family.OP_CLAYTON, 2.0, 1.0)) == pytest.approx(0.5)
    assert kendall_tau(CopulaSpec(Family.FRANK, 1e-12)) == 0.0


def test_kendall_tau_frank_properties():
    tau5 = kendall_tau(CopulaSpec(Family.FRANK, 5.0))
    assert kendall_tau(CopulaSpec(Family.FRANK, -5.0)) == pytest.approx(-tau5, rel=1e-9)
    assert 0 < tau5 < 1
    # series oracle at x=2 (inside the 2*pi radius, fast convergence):
    # D_1(x) = 1 - x/4 + sum_k B_2k x^2k / ((2k+1) (2k)!)
    x = 2.0
    bernoulli = [1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6]
    d1 = 1 - x / 4 + sum(
        b * x ** (2 * (k + 1)) / ((2 * (k + 1) + 1) * math.factorial(2 * (k + 1)))
        for k, b in enumerate(bernoulli)
    )
    assert kendall_tau(CopulaSpec(Family.FRANK, x)) == pytest.approx(
        1 - 4 / x + 4 * d1 / x, rel=1e-6
    )
