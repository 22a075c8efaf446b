"""Conjugate Gibbs sampler for the Plackett-Luce regression posterior.

Each sweep draws the latent winning-feature indicators C, the winner arrival
times Z, then every weight ``lam_kj`` from its conjugate Gamma conditional.
Two optional extras from the identifiability analysis: a Metropolis-Hastings
step on the Gamma shape ``a`` (log-normal random walk under the truncated
``p(a) ~ 1/a`` prior) and a total-mass rescaling move that resamples
``Lambda = sum lam`` from its prior without touching the normalized weights.

Only normalized weights are likelihood-identified, so predictions are
invariant to the rescaling move and to the rate hyperparameter ``b``.
Draws are stored unnormalized and normalized on demand.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import EmptyChainError, InfeasibleStateError, InvalidParameterError
from .model import Dataset, FeatureMap, PLWeights, AugmentedState, class_probabilities, transform
from .rng import RngStream

__all__ = [
    "GibbsConfig", "Chain", "gibbs_sweep", "mh_update_a", "rescale_total_mass",
    "run_chain", "posterior_predict", "posterior_summaries",
]

A_BOUNDS = (1e-3, 1e3)  # truncation of the improper 1/a prior


@dataclass(frozen=True)
class GibbsConfig:
    burn_in: int = 5000
    samples: int = 5000
    thin: int = 1
    sample_hyper_a: bool = False
    mh_step_scale: float = 0.1
    rescale_lambda: bool = False
    adapt_mh: bool = True  # adapt the MH scale during burn-in only

    def __post_init__(self):
        if self.burn_in < 0 or self.samples < 1 or self.thin < 1:
            raise InvalidParameterError("need burn_in >= 0, samples >= 1, thin >= 1")
        if self.mh_step_scale <= 0:
            raise InvalidParameterError("mh_step_scale must be positive")


@dataclass
class Chain:
    """Stored posterior draws of ``lam`` (S x K x p), optionally of ``a``."""

    lam_draws: np.ndarray
    loglik: np.ndarray
    a_draws: np.ndarray | None = None
    accept_count: int = 0
    proposal_count: int = 0
    sample_time: float = 0.0  # wall-clock seconds spent sampling

    @property
    def n_draws(self) -> int:
        return self.lam_draws.shape[0]

    def normalized_draws(self) -> np.ndarray:
        totals = self.lam_draws.sum(axis=(1, 2))
        return self.lam_draws / totals[:, None, None]

    def flat_draws(self, normalized: bool = False) -> np.ndarray:
        """Draws as (S, K*p) in row-major (k, j) coordinate order."""
        draws = self.normalized_draws() if normalized else self.lam_draws
        return draws.reshape(self.n_draws, -1)

    def coordinate_names(self) -> list[str]:
        _, K, p = self.lam_draws.shape
        return [f"lam_{k + 1}_{j + 1}" for k in range(K) for j in range(p)]

    def to_csv(self, path) -> None:
        """One row per draw: draw index, lam_kj columns, optional trailing a."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["draw"] + self.coordinate_names()
            if self.a_draws is not None:
                header.append("a")
            writer.writerow(header)
            flat = self.flat_draws()
            for s in range(self.n_draws):
                row = [s] + [repr(float(v)) for v in flat[s]]
                if self.a_draws is not None:
                    row.append(repr(float(self.a_draws[s])))
                writer.writerow(row)

    @staticmethod
    def from_csv(path, n_classes: int) -> "Chain":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader]
        has_a = header[-1] == "a"
        arr = np.asarray(rows)
        ncoord = len(header) - 1 - (1 if has_a else 0)
        lam = arr[:, 1:1 + ncoord].reshape(len(rows), n_classes, ncoord // n_classes)
        a = arr[:, -1] if has_a else None
        return Chain(lam, np.full(len(rows), np.nan), a)


def _sample_indicators(W: np.ndarray, lam: np.ndarray, y: np.ndarray,
                       rng: RngStream) -> np.ndarray:
    probs = W * lam[y]  # (n, p)
    totals = probs.sum(axis=1)
    if np.any(totals <= 0) or not np.all(np.isfinite(totals)):
        raise InfeasibleStateError("zero normalizer in indicator draw (should be impossible "
                                   "with strictly positive weights)")
    cum = np.cumsum(probs, axis=1)
    u = rng.generator.random(len(y)) * totals
    return (u[:, None] >= cum).sum(axis=1)


def gibbs_sweep(lam: np.ndarray, data: Dataset, W: np.ndarray,
                hyper_a: float, hyper_b: float, rng: RngStream):
    """One full conditional sweep; returns the new ``lam`` and the latent state."""
    C = _sample_indicators(W, lam, data.y, rng)
    rate_z = W @ lam.sum(axis=0)
    Z = rng.generator.exponential(size=data.n) / rate_z
    n_kj = np.zeros_like(lam)
    np.add.at(n_kj, (data.y, C), 1.0)
    post_rate = hyper_b + Z @ W  # (p,)
    lam_new = rng.generator.gamma(hyper_a + n_kj) / post_rate[None, :]
    return lam_new, AugmentedState(C, Z)


def _log_target_a(a: float, lam: np.ndarray, hyper_b: float) -> float:
    """Log density (up to constants) of a given lam: Gamma prior terms plus ln p(a) = -ln a."""
    if lam.size:
        ll = lam.size * (a * np.log(hyper_b) - special.gammaln(a)) \
            + (a - 1.0) * np.log(lam).sum()
    else:
        ll = 0.0
    return ll - np.log(a)


def mh_update_a(a: float, lam: np.ndarray, rng: RngStream, scale: float,
                hyper_b: float, bounds=A_BOUNDS):
    """Log-normal random-walk MH step on ``a``; returns ``(a_new, accepted)``.

    The acceptance ratio multiplies the Gamma prior density of every weight at
    the proposed versus current shape, the ``1/a`` prior ratio, and the
    ``a'/a`` Jacobian of the log-scale proposal. Proposals outside the
    truncation bounds are rejected.
    """
    a_prop = a * np.exp(scale * rng.generator.standard_normal())
    if not (bounds[0] <= a_prop <= bounds[1]):
        return a, False
    log_ratio = (_log_target_a(a_prop, lam, hyper_b) - _log_target_a(a, lam, hyper_b)
                 + np.log(a_prop) - np.log(a))
    if np.log(rng.generator.random()) < log_ratio:
        return float(a_prop), True
    return a, False


def rescale_total_mass(lam: np.ndarray, hyper_b: float, rng: RngStream) -> np.ndarray:
    """Resample ``Lambda`` from its Gam(Kp, b) prior and rescale ``lam`` to match."""
    total = lam.sum()
    if total <= 0:
        raise InvalidParameterError("total mass must be positive")
    new_total = rng.generator.gamma(lam.size, scale=1.0 / hyper_b)
    return lam * (new_total / total)


def _log_likelihood(data: Dataset, W: np.ndarray, lam: np.ndarray) -> float:
    scores = W @ lam.T
    own = scores[np.arange(data.n), data.y]
    return float(np.log(own).sum() - np.log(scores.sum(axis=1)).sum())


def run_chain(data: Dataset, fmap: FeatureMap, hyper_a: float, hyper_b: float,
              config: GibbsConfig = GibbsConfig(), rng: RngStream | None = None,
              init_lam: np.ndarray | None = None) -> Chain:
    """Burn in, then collect ``samples`` draws, storing every ``thin``-th sweep."""
    if hyper_a <= 0 or hyper_b <= 0:
        raise InvalidParameterError("need hyper_a > 0 and hyper_b > 0")
    if rng is None:
        rng = RngStream(0)
    W = transform(data.X, fmap)
    K, p = data.n_classes, fmap.p
    lam = np.ones((K, p)) if init_lam is None else np.array(init_lam, dtype=float)
    a = float(hyper_a)
    scale = config.mh_step_scale

    t0 = time.perf_counter()
    accepted_burn = 0
    for it in range(config.burn_in):
        lam, _ = gibbs_sweep(lam, data, W, a, hyper_b, rng)
        if config.sample_hyper_a:
            a, acc = mh_update_a(a, lam, rng, scale, hyper_b)
            accepted_burn += acc
            if config.adapt_mh and (it + 1) % 100 == 0:
                # steer acceptance into the 30-45% window, then freeze
                rate = accepted_burn / 100
                if rate < 0.30:
                    scale *= 0.8
                elif rate > 0.45:
                    scale *= 1.25
                accepted_burn = 0
        if config.rescale_lambda:
            lam = rescale_total_mass(lam, hyper_b, rng)

    lam_draws = np.empty((config.samples, K, p))
    a_draws = np.empty(config.samples) if config.sample_hyper_a else None
    loglik = np.empty(config.samples)
    accept = proposals = 0
    for s in range(config.samples):
        for _ in range(config.thin):
            lam, _ = gibbs_sweep(lam, data, W, a, hyper_b, rng)
            if config.sample_hyper_a:
                a, acc = mh_update_a(a, lam, rng, scale, hyper_b)
                accept += acc
                proposals += 1
            if config.rescale_lambda:
                lam = rescale_total_mass(lam, hyper_b, rng)
        lam_draws[s] = lam
        if a_draws is not None:
            a_draws[s] = a
        loglik[s] = _log_likelihood(data, W, lam)
    elapsed = time.perf_counter() - t0
    return Chain(lam_draws, loglik, a_draws, accept, proposals, elapsed)


def posterior_predict(chain: Chain, W_new) -> np.ndarray:
    """Bayesian model-averaged class probabilities for one W row or a matrix."""
    if chain.n_draws == 0:
        raise EmptyChainError("chain holds no draws")
    W_new = np.asarray(W_new, dtype=float)
    single = W_new.ndim == 1
    Wm = W_new[None, :] if single else W_new
    scores = np.einsum("mp,skp->msk", Wm, chain.lam_draws)  # (m, S, K)
    probs = (scores / scores.sum(axis=2, keepdims=True)).mean(axis=1)
    return probs[0] if single else probs


def posterior_summaries(chain: Chain, quantiles=(0.05, 0.5, 0.95)) -> dict:
    """Entry-wise mean, median and quantiles of the per-draw normalized weights."""
    if chain.n_draws == 0:
        raise EmptyChainError("chain holds no draws")
    norm = chain.normalized_draws()
    return {
        "mean": norm.mean(axis=0),
        "median": np.median(norm, axis=0),
        "quantiles": {q: np.quantile(norm, q, axis=0) for q in quantiles},
    }
