"""Baseline sampler tests: the logistic scale-mixture machinery, the lasso
prior updates, and conditional invariance of the coefficient block update."""

import numpy as np
import pytest
from scipy import integrate, stats

from oracles import logistic_density
from plreg.errors import InvalidParameterError
from plreg.model import Dataset
from plreg.rng import RngStream
from plreg.sparse_logit import (
    LogitConfig,
    _ks_mixture_density,
    _sample_mixture_variance,
    _truncated_logistic,
    logit_posterior_predict,
    logit_probabilities,
    run_logit_chain,
    update_beta_block,
    update_tau,
    update_theta,
)


def test_logit_probabilities_hand_example():
    beta = np.array([[1.0, 0.0], [0.0, -1.0]])  # K-1 = 2, reference class third
    x = np.array([2.0, 3.0])
    probs = logit_probabilities(x, beta)
    scores = np.array([2.0, -3.0, 0.0])
    expected = np.exp(scores) / np.exp(scores).sum()
    np.testing.assert_allclose(probs, expected, rtol=1e-12)


def test_logit_probabilities_binary_reduces_to_sigmoid():
    beta = np.array([[0.7, -0.2]])
    X = RngStream(70).generator.standard_normal((10, 2))
    probs = logit_probabilities(X, beta)
    sigm = 1.0 / (1.0 + np.exp(-(X @ beta[0])))
    np.testing.assert_allclose(probs[:, 0], sigm, rtol=1e-12)


def test_update_theta_conjugate_moments():
    rng = RngStream(71)
    tau = np.array([[0.5, 2.0], [1.0, 3.0]])
    c, d, K, p = 1.5, 0.5, 2, 2
    draws = np.array([update_theta(tau, c, d, K, p, rng) for _ in range(40_000)])
    shape, rate = K * p + c, tau.sum() / 2.0 + d
    assert draws.mean() == pytest.approx(shape / rate, rel=0.02)
    assert draws.var() == pytest.approx(shape / rate**2, rel=0.05)


def test_update_tau_inverse_matches_reference_distribution():
    # 1/tau should be inverse-Gaussian(sqrt(theta)/|beta|, theta)
    theta, beta = 1.7, 0.6
    rng = RngStream(72)
    inv = 1.0 / np.array([update_tau(np.array([beta]), theta, rng)[0]
                          for _ in range(30_000)])
    mean, lam = np.sqrt(theta) / beta, theta
    _, pval = stats.kstest(inv, stats.invgauss(mu=mean / lam, scale=lam).cdf)
    assert pval > 1e-3


def test_update_tau_survives_tiny_and_huge_coefficients():
    rng = RngStream(73)
    for theta in (1e-6, 1.0, 1e3):
        tau = update_tau(np.array([0.0, 1e-12, 1e6]), theta, rng)
        assert np.all(tau > 0) and np.all(np.isfinite(tau))


def test_mixture_density_normalizes_and_reproduces_logistic():
    total, _ = integrate.quad(lambda l: _ks_mixture_density(np.array([l]))[0],
                              0, 60, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)
    for x in (0.0, 0.7, 2.0):
        val, _ = integrate.quad(
            lambda l: stats.norm.pdf(x, scale=np.sqrt(l))
            * _ks_mixture_density(np.array([l]))[0], 0, 80, limit=200)
        assert val == pytest.approx(logistic_density(x), rel=1e-6)


def test_mixture_density_continuous_at_series_switch():
    below = _ks_mixture_density(np.array([1.0 - 1e-9]))[0]
    above = _ks_mixture_density(np.array([1.0 + 1e-9]))[0]
    assert below == pytest.approx(above, rel=1e-6)


def test_mixture_variance_sampler_matches_quadrature_mean():
    r = 1.3
    rng = RngStream(74)
    draws = _sample_mixture_variance(np.full(40_000, r), rng)
    dens = lambda l: stats.norm.pdf(r, scale=np.sqrt(l)) * _ks_mixture_density(np.array([l]))[0]
    z, _ = integrate.quad(dens, 0, 100, limit=200)
    m, _ = integrate.quad(lambda l: l * dens(l), 0, 100, limit=200)
    assert draws.mean() == pytest.approx(m / z, rel=0.02)


def test_truncated_logistic_sign_and_distribution():
    rng = RngStream(75)
    mu = np.full(30_000, 0.4)
    pos = _truncated_logistic(mu, np.ones_like(mu, dtype=bool), rng)
    neg = _truncated_logistic(mu, np.zeros_like(mu, dtype=bool), rng)
    assert np.all(pos > 0) and np.all(neg < 0)
    # compare against the truncated logistic CDF on (0, inf)
    f0 = stats.logistic(loc=0.4).cdf(0.0)
    cdf = lambda z: (stats.logistic(loc=0.4).cdf(z) - f0) / (1.0 - f0)
    _, pval = stats.kstest(pos, cdf)
    assert pval > 1e-3


def test_beta_block_invariance_against_quadrature():
    # binary problem, single coefficient: iterate the (u, beta) block with tau
    # fixed and compare its empirical stationary law to the grid posterior
    rng = RngStream(76)
    X = rng.generator.standard_normal((25, 1))
    y = (rng.generator.random(25) < 1.0 / (1.0 + np.exp(-1.2 * X[:, 0]))).astype(int)
    y = 1 - y  # class 0 is the modelled class (reference is the last)
    tau = np.array([4.0])

    grid = np.linspace(-6, 8, 4001)
    scores = np.outer(X[:, 0], grid)
    loglik = np.where((y == 0)[:, None], scores, 0.0).sum(axis=0) \
        - np.log1p(np.exp(scores)).sum(axis=0)
    logpost = loglik - grid**2 / (2 * tau[0])
    dens = np.exp(logpost - logpost.max())
    dens /= np.trapezoid(dens, grid)
    want_mean = np.trapezoid(grid * dens, grid)
    want_sd = np.sqrt(np.trapezoid((grid - want_mean) ** 2 * dens, grid))

    beta = np.zeros((1, 1))
    draws = []
    for it in range(6000):
        beta[0] = update_beta_block(0, beta, tau, X, y, rng)
        if it >= 500:
            draws.append(beta[0, 0])
    draws = np.asarray(draws)
    se = draws.std() / np.sqrt(len(draws) / 20.0)  # crude autocorrelation allowance
    assert abs(draws.mean() - want_mean) < 4 * se
    assert draws.std() == pytest.approx(want_sd, rel=0.1)


def test_gibbs_pair_recovers_laplace_marginal():
    # alternating beta | tau ~ N(0, tau) and the tau update with theta fixed
    # must leave the Laplace(1/sqrt(theta)) marginal of beta invariant
    theta = 2.0
    rng = RngStream(77)
    beta = 0.1
    draws = []
    for it in range(40_000):
        tau = update_tau(np.array([beta]), theta, rng)[0]
        beta = np.sqrt(tau) * rng.generator.standard_normal()
        if it % 10 == 0:
            draws.append(beta)
    _, pval = stats.kstest(draws, stats.laplace(scale=1.0 / np.sqrt(theta)).cdf)
    assert pval > 1e-3


def test_run_logit_chain_deterministic_and_shaped():
    rng = RngStream(78)
    X = rng.generator.standard_normal((30, 2))
    y = rng.generator.integers(0, 3, size=30)
    data = Dataset(X, y, 3)
    cfg = LogitConfig(burn_in=20, samples=30)
    c1 = run_logit_chain(data, cfg, RngStream(79))
    c2 = run_logit_chain(data, cfg, RngStream(79))
    np.testing.assert_array_equal(c1.lam_draws, c2.lam_draws)
    assert c1.lam_draws.shape == (30, 2, 3)  # K-1 classes, 2 covariates + intercept
    assert np.all(c1.a_draws > 0)  # trailing theta draws


def test_logit_posterior_predict_shapes_and_simplex():
    rng = RngStream(80)
    X = rng.generator.standard_normal((25, 2))
    y = rng.generator.integers(0, 2, size=25)
    chain = run_logit_chain(Dataset(X, y, 2), LogitConfig(burn_in=30, samples=50),
                            RngStream(81))
    probs = logit_posterior_predict(chain, X)
    assert probs.shape == (25, 2)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        LogitConfig(hyper_c=0.0)
    with pytest.raises(InvalidParameterError):
        LogitConfig(samples=0)
    with pytest.raises(InvalidParameterError):
        update_tau(np.array([1.0]), 0.0, RngStream(0))
    with pytest.raises(InvalidParameterError):
        update_theta(np.array([-1.0]), 1.0, 1.0, 1, 1, RngStream(0))
