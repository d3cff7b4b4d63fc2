import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import five_point_difference, normal_logpdf, relative_errors, student_t_logpdf
from scipy import stats
from scipy.special import digamma, gammaln

from adaptive_traces import distributions as D

seeds = st.integers(0, 2**32 - 1)


def random_pair(rng, dim=None):
    dim = dim or int(rng.integers(1, 4))
    new = D.DiagNormal(rng.normal(0, 1, dim), rng.uniform(0.3, 2.0, dim))
    old = D.DiagNormal(new.mu + rng.normal(0, 0.5, dim), new.sigma * rng.uniform(0.7, 1.4, dim))
    return new, old


def random_t(rng, dim=None):
    dim = dim or int(rng.integers(1, 4))
    return D.DiagStudentT(rng.normal(0, 1, dim), rng.uniform(0.3, 2.0, dim), rng.uniform(2.5, 30.0))


# --- special functions, high-precision reference values -------------------

@pytest.mark.parametrize(
    "x, lgamma_ref, digamma_ref",
    [
        (0.5, 0.5723649429247001, -1.9635100260214235),
        (1.0, 0.0, -0.5772156649015329),
        (1.5, -0.12078223763524522, 0.03648997397857652),
        (10.0, 12.801827480081469, 2.251752589066721),
        (1e6, 12815504.569147611, 13.815510057964275),
    ],
)
def test_special_function_reference_values(x, lgamma_ref, digamma_ref):
    assert gammaln(x) == pytest.approx(lgamma_ref, rel=1e-12, abs=1e-12)
    assert digamma(x) == pytest.approx(digamma_ref, rel=1e-12, abs=1e-12)


# --- sampling --------------------------------------------------------------

def test_degenerate_scale_sample():
    rng = np.random.default_rng(0)
    d = D.DiagNormal(np.array([0.3, -1.2]), np.array([1e-12, 1e-12]))
    assert np.allclose(D.sample(d, rng), d.mu, atol=1e-9, rtol=0)


def test_normal_sample_mean_clt():
    rng = np.random.default_rng(1)
    d = D.DiagNormal(np.array([0.7]), np.array([1.3]))
    xs = np.array([D.sample(d, rng)[0] for _ in range(100_000)])
    assert abs(xs.mean() - 0.7) < 4 * 1.3 / math.sqrt(1e5)


def test_student_t_large_nu_matches_normal():
    rng = np.random.default_rng(2)
    d = D.DiagStudentT(np.array([0.5]), np.array([2.0]), 1e6)
    xs = np.array([D.sample(d, rng)[0] for _ in range(10_000)])
    ks = stats.kstest(xs, stats.norm(loc=0.5, scale=2.0).cdf).statistic
    assert ks < 0.02


def test_sample_is_deterministic_given_rng():
    d = D.DiagStudentT(np.zeros(3), np.ones(3), 4.0)
    a = D.sample(d, np.random.default_rng(5))
    b = D.sample(d, np.random.default_rng(5))
    assert np.array_equal(a, b)


# --- log densities ---------------------------------------------------------

def test_standard_normal_log_density_at_mode():
    lp, _ = D.log_prob(D.DiagNormal(np.zeros(1), np.ones(1)), np.zeros(1))
    assert lp == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-15)
    assert lp == pytest.approx(-0.9189, abs=1e-4)


def test_log_density_matches_reference_formulas():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = D.DiagNormal(rng.normal(size=2), rng.uniform(0.2, 3, 2))
        t = D.DiagStudentT(n.mu, n.sigma, rng.uniform(2.1, 50))
        a = rng.normal(size=2) * 2
        assert D.log_prob(n, a)[0] == pytest.approx(normal_logpdf(a, n.mu, n.sigma), rel=1e-13)
        assert D.log_prob(t, a)[0] == pytest.approx(student_t_logpdf(a, t.mu, t.sigma, t.nu), rel=1e-12)
        ref = stats.t(df=t.nu, loc=t.mu, scale=t.sigma).logpdf(a).sum()
        assert D.log_prob(t, a)[0] == pytest.approx(ref, rel=1e-10)


def _fd_grads(dist, a):
    d = dist.dim
    is_t = isinstance(dist, D.DiagStudentT)
    flat = np.concatenate([dist.mu, dist.sigma] + ([[dist.nu]] if is_t else []))

    def f(v):
        if is_t:
            return D.log_prob(D.DiagStudentT(v[:d], v[d : 2 * d], v[2 * d]), a)[0]
        return D.log_prob(D.DiagNormal(v[:d], v[d:]), a)[0]

    return five_point_difference(f, flat, h=1e-3)


def test_log_prob_gradients_finite_differences():
    rng = np.random.default_rng(4)
    for i in range(100):
        dist = random_t(rng) if i % 2 else random_pair(rng)[0]
        a = D.sample(dist, rng)
        _, g = D.log_prob(dist, a)
        analytic = np.concatenate([g["mu"], g["sigma"]] + ([g["nu"]] if "nu" in g else []))
        assert relative_errors(analytic, _fd_grads(dist, a), rtol=1e-6, atol=1e-8).max() < 1e-6


def test_student_t_large_nu_log_density_matches_normal():
    rng = np.random.default_rng(5)
    for _ in range(20):
        mu, sigma = rng.normal(size=2), rng.uniform(0.3, 2, 2)
        a = mu + sigma * rng.normal(size=2)
        lt = D.log_prob(D.DiagStudentT(mu, sigma, 1e6), a)[0]
        ln = D.log_prob(D.DiagNormal(mu, sigma), a)[0]
        assert abs(lt - ln) < 1e-4


@given(seeds)
def test_self_ratio_is_exactly_one(seed):
    rng = np.random.default_rng(seed)
    dist = random_t(rng) if seed % 2 else random_pair(rng)[0]
    a = D.sample(dist, rng)
    lp1, _ = D.log_prob(dist, a)
    lp2, _ = D.log_prob(dist, a)
    assert math.exp(lp1 - lp2) == 1.0


# --- KL ----------------------------------------------------------------------

def test_kl_examples():
    p = D.DiagNormal(np.zeros(1), np.ones(1))
    assert D.kl_normal(p, p) == 0.0
    assert D.kl_normal(D.DiagNormal(np.ones(1), np.ones(1)), p) == pytest.approx(0.5, abs=1e-15)


def test_kl_against_monte_carlo():
    rng = np.random.default_rng(6)
    for _ in range(50):
        new, old = random_pair(rng)
        x = new.mu + new.sigma * rng.standard_normal((100_000, new.dim))
        z_new = (x - new.mu) / new.sigma
        z_old = (x - old.mu) / old.sigma
        lr = np.sum(-0.5 * z_new**2 - np.log(new.sigma) + 0.5 * z_old**2 + np.log(old.sigma), axis=1)
        se = lr.std(ddof=1) / math.sqrt(lr.size)
        assert abs(D.kl_normal(new, old) - lr.mean()) < 3 * se + 1e-12


@given(seeds)
def test_kl_nonnegative(seed):
    new, old = random_pair(np.random.default_rng(seed))
    assert D.kl_normal(new, old) >= 0.0
    assert D.kl_normal(new, new) == 0.0


# --- Pearson -----------------------------------------------------------------

def test_pearson_identity_is_zero():
    rng = np.random.default_rng(7)
    for m in (1, 16, 1000):
        t = random_t(rng)
        assert D.pearson_mc(t, t, m, rng) == (0.0, False)
        n = random_pair(rng)[0]
        assert D.pearson_mc(n, n, m, rng)[0] == 0.0


def test_pearson_single_sample_arithmetic():
    value, saturated = D.pearson_from_log_ratios([math.log(1.5)])
    assert value == pytest.approx(0.25, abs=1e-15)
    assert not saturated


def test_pearson_clamp_flags_saturation():
    value, saturated = D.pearson_from_log_ratios([1e4])
    assert saturated
    assert value == pytest.approx((D.RATIO_CLAMP - 1) ** 2)


def test_pearson_gaussian_closed_form():
    rng = np.random.default_rng(8)
    new = D.DiagNormal(np.array([0.1]), np.ones(1))
    old = D.DiagNormal(np.zeros(1), np.ones(1))
    value, _ = D.pearson_mc(new, old, 100_000, rng)
    x = rng.standard_normal(100_000)
    terms = np.expm1(0.1 * x - 0.005) ** 2
    se = terms.std(ddof=1) / math.sqrt(terms.size)
    assert abs(value - math.expm1(0.01)) < 3 * se
    assert math.expm1(0.01) == pytest.approx(0.01005, abs=1e-5)


@given(seeds, st.integers(1, 64))
def test_pearson_nonnegative(seed, m):
    rng = np.random.default_rng(seed)
    a, b = random_t(rng, 2), random_t(rng, 2)
    value, _ = D.pearson_mc(a, b, m, rng)
    assert value >= 0.0 and math.isfinite(value)


def test_pearson_rejects_mixed_families():
    rng = np.random.default_rng(0)
    with pytest.raises(TypeError):
        D.pearson_mc(random_t(rng, 1), random_pair(rng, 1)[0], 4, rng)


# --- value divergence and entropy ---------------------------------------------

@pytest.mark.parametrize("new, old, expected", [(3.0, 3.0, 0.0), (2.0, 0.0, 2.0), (-1.0, 1.0, 2.0)])
def test_value_divergence(new, old, expected):
    assert D.value_divergence(new, old) == expected


def test_entropy_estimate_at_mode():
    h, _ = D.entropy_estimate(D.DiagNormal(np.zeros(1), np.ones(1)), np.zeros(1))
    assert h == pytest.approx(0.9189, abs=1e-4)


def test_entropy_estimate_monte_carlo_and_scale_shift():
    rng = np.random.default_rng(9)
    means = []
    for scale in (1.0, 10.0):
        d = D.DiagNormal(np.array([0.2, -0.4]), np.array([0.5, 1.5]) * scale)
        xs = d.mu + d.sigma * rng.standard_normal((100_000, 2))
        hs = np.array([D.entropy_estimate(d, x)[0] for x in xs[:20_000]])
        se = hs.std(ddof=1) / math.sqrt(hs.size)
        assert abs(hs.mean() - D.normal_entropy(d)) < 3 * se
        means.append(hs.mean())
    assert means[1] - means[0] == pytest.approx(2 * math.log(10.0), abs=0.05)


def test_validation():
    with pytest.raises(ValueError):
        D.DiagNormal(np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        D.DiagStudentT(np.zeros(1), np.ones(1), 2.0)
    with pytest.raises(ValueError):
        D.log_prob(D.DiagNormal(np.zeros(2), np.ones(2)), np.zeros(3))
