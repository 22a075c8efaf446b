"""Gibbs sampler tests: conditional correctness, the shape MH step against a
numeric density oracle, rescaling invariance, and chain persistence."""

import numpy as np
import pytest
from scipy import special, stats

from plreg.datasets import synthetic_pl
from plreg.errors import EmptyChainError, InvalidParameterError
from plreg.gibbs import (
    A_BOUNDS,
    Chain,
    GibbsConfig,
    gibbs_sweep,
    mh_update_a,
    posterior_predict,
    posterior_summaries,
    rescale_total_mass,
    run_chain,
    _sample_indicators,
)
from plreg.model import Dataset, FeatureMap, PLWeights, class_probabilities, transform
from plreg.rng import RngStream


def _tiny_problem(seed=20):
    data, _ = synthetic_pl(15, 1, 2, RngStream(seed))
    fmap = FeatureMap.default(1)
    return data, fmap, transform(data.X, fmap)


def test_indicator_frequencies_match_conditional():
    data, fmap, W = _tiny_problem()
    lam = RngStream(21).generator.gamma(1.0, size=(2, fmap.p))
    rng = RngStream(22)
    n_rep = 20_000
    counts = np.zeros((data.n, fmap.p))
    for _ in range(n_rep):
        C = _sample_indicators(W, lam, data.y, rng)
        counts[np.arange(data.n), C] += 1
    freq = counts / n_rep
    target = W * lam[data.y]
    target /= target.sum(axis=1, keepdims=True)
    se = np.sqrt(target * (1 - target) / n_rep)
    assert np.all(np.abs(freq - target) < 5 * se + 1e-4)


def test_sweep_conditionals_have_correct_moments():
    data, fmap, W = _tiny_problem(23)
    lam0 = RngStream(24).generator.gamma(1.0, size=(2, fmap.p))
    a, b = 1.3, 0.8
    rng = RngStream(25)
    n_rep = 4000
    z_resid = np.zeros(data.n)
    lam_resid = []
    for _ in range(n_rep):
        lam_new, aug = gibbs_sweep(lam0, data, W, a, b, rng)
        z_resid += aug.Z * (W @ lam0.sum(axis=0)) - 1.0  # Exp(rate): E[rate*Z] = 1
        n_kj = np.zeros_like(lam0)
        np.add.at(n_kj, (data.y, aug.C), 1.0)
        rate = b + aug.Z @ W
        mean = (a + n_kj) / rate[None, :]
        sd = np.sqrt(a + n_kj) / rate[None, :]
        lam_resid.append((lam_new - mean) / sd)
    assert np.abs(z_resid / n_rep).max() < 5.0 / np.sqrt(n_rep)
    mean_resid = np.mean(lam_resid, axis=0)
    assert np.abs(mean_resid).max() < 5.0 / np.sqrt(n_rep)


def test_mh_shape_prior_only_is_log_uniform():
    # with no weights the target reduces to the truncated 1/a prior
    rng = RngStream(26)
    lam = np.zeros((0, 0))
    a = 1.0
    draws = []
    for step in range(60_000):
        a, _ = mh_update_a(a, lam, rng, scale=3.0, hyper_b=1.0)
        if step % 20 == 0:
            draws.append(np.log(a))
    lo, hi = np.log(A_BOUNDS[0]), np.log(A_BOUNDS[1])
    _, pval = stats.kstest(draws, stats.uniform(lo, hi - lo).cdf)
    assert pval > 1e-3


def test_mh_shape_stationary_density_matches_numeric_oracle():
    # fixed weights: target density over a is known up to a constant; build
    # its CDF by numeric integration and KS-test the thinned MH draws
    lam = np.array([[1.5, 0.4]])
    b = 1.0

    grid = np.linspace(np.log(A_BOUNDS[0]), np.log(A_BOUNDS[1]), 8001)
    a_grid = np.exp(grid)
    # density over ln a includes the Jacobian a
    log_dens = (lam.size * (a_grid * np.log(b) - special.gammaln(a_grid))
                + (a_grid - 1.0) * np.log(lam).sum() - np.log(a_grid) + grid)
    dens = np.exp(log_dens - log_dens.max())
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(grid))])
    cdf /= cdf[-1]

    rng = RngStream(27)
    a = 1.0
    draws = []
    for step in range(60_000):
        a, _ = mh_update_a(a, lam, rng, scale=1.5, hyper_b=b)
        if step % 30 == 0:
            draws.append(np.log(a))
    _, pval = stats.kstest(draws, lambda q: np.interp(q, grid, cdf))
    assert pval > 1e-3


def test_mh_rejects_out_of_bounds_proposals():
    rng = RngStream(28)
    lam = np.ones((1, 1))
    for _ in range(2000):
        a, _ = mh_update_a(1.0, lam, rng, scale=10.0, hyper_b=1.0)
        assert A_BOUNDS[0] <= a <= A_BOUNDS[1]


def test_rescale_preserves_normalized_weights():
    rng = RngStream(29)
    lam = rng.generator.gamma(1.0, size=(3, 5))
    before = lam / lam.sum()
    lam2 = rescale_total_mass(lam, 1.0, rng)
    np.testing.assert_allclose(lam2 / lam2.sum(), before, rtol=1e-12)


def test_rescale_total_mass_prior_moments():
    rng = RngStream(30)
    lam = np.ones((2, 3))
    b = 2.0
    totals = np.array([rescale_total_mass(lam, b, rng).sum() for _ in range(20_000)])
    assert totals.mean() == pytest.approx(lam.size / b, rel=0.03)
    assert totals.var() == pytest.approx(lam.size / b**2, rel=0.1)


def test_chain_with_rescaling_has_invariant_predictions():
    data, fmap, W = _tiny_problem(31)
    base = GibbsConfig(burn_in=200, samples=800)
    plain = run_chain(data, fmap, 1.0, 1.0, base, RngStream(32))
    rescaled = run_chain(data, fmap, 1.0, 1.0,
                         GibbsConfig(burn_in=200, samples=800, rescale_lambda=True),
                         RngStream(33))
    p1 = posterior_predict(plain, W)
    p2 = posterior_predict(rescaled, W)
    assert np.abs(p1 - p2).max() < 0.05  # same posterior, different seeds


def test_run_chain_deterministic_given_seed():
    data, fmap, _ = _tiny_problem(34)
    cfg = GibbsConfig(burn_in=10, samples=20, sample_hyper_a=True)
    c1 = run_chain(data, fmap, 1.0, 1.0, cfg, RngStream(35))
    c2 = run_chain(data, fmap, 1.0, 1.0, cfg, RngStream(35))
    np.testing.assert_array_equal(c1.lam_draws, c2.lam_draws)
    np.testing.assert_array_equal(c1.a_draws, c2.a_draws)


def test_sampled_shape_stays_in_bounds_and_counts_proposals():
    data, fmap, _ = _tiny_problem(36)
    cfg = GibbsConfig(burn_in=300, samples=300, sample_hyper_a=True)
    chain = run_chain(data, fmap, 1.0, 1.0, cfg, RngStream(37))
    assert chain.proposal_count == 300
    assert np.all((chain.a_draws >= A_BOUNDS[0]) & (chain.a_draws <= A_BOUNDS[1]))


def test_chain_csv_round_trip(tmp_path):
    data, fmap, _ = _tiny_problem(38)
    cfg = GibbsConfig(burn_in=5, samples=12, sample_hyper_a=True)
    chain = run_chain(data, fmap, 1.0, 1.0, cfg, RngStream(39))
    path = tmp_path / "chain.csv"
    chain.to_csv(path)
    loaded = Chain.from_csv(path, data.n_classes)
    np.testing.assert_array_equal(loaded.lam_draws, chain.lam_draws)
    np.testing.assert_array_equal(loaded.a_draws, chain.a_draws)
    assert loaded.coordinate_names() == chain.coordinate_names()


def test_posterior_predict_single_draw_equals_point_prediction():
    data, fmap, W = _tiny_problem(40)
    lam = RngStream(41).generator.gamma(1.0, size=(2, fmap.p))
    chain = Chain(lam[None, :, :], np.array([0.0]))
    np.testing.assert_allclose(posterior_predict(chain, W),
                               class_probabilities(W, PLWeights(lam)), rtol=1e-12)
    np.testing.assert_allclose(posterior_predict(chain, W[0]),
                               class_probabilities(W[0], PLWeights(lam)), rtol=1e-12)


def test_posterior_summaries_shapes_and_consistency():
    data, fmap, _ = _tiny_problem(42)
    chain = run_chain(data, fmap, 1.0, 1.0, GibbsConfig(burn_in=10, samples=50),
                      RngStream(43))
    summ = posterior_summaries(chain)
    K, p = data.n_classes, fmap.p
    assert summ["mean"].shape == (K, p)
    np.testing.assert_allclose(summ["mean"].sum(), 1.0, atol=1e-10)
    np.testing.assert_allclose(summ["mean"], chain.normalized_draws().mean(axis=0))
    assert set(summ["quantiles"]) == {0.05, 0.5, 0.95}


def test_empty_chain_and_bad_config_rejected():
    with pytest.raises(EmptyChainError):
        posterior_predict(Chain(np.empty((0, 2, 3)), np.empty(0)), np.ones(3))
    with pytest.raises(InvalidParameterError):
        GibbsConfig(samples=0)
    data, fmap, _ = _tiny_problem(44)
    with pytest.raises(InvalidParameterError):
        run_chain(data, fmap, 1.0, 0.0, GibbsConfig(burn_in=1, samples=1))
