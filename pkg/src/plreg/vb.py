"""Mean-field variational inference for the Plackett-Luce posterior.

The factorized posterior is q(C) q(Z) q(lam) with a discrete factor per
observation, an exponential factor per arrival time, and a Gamma factor per
weight. The Gamma factor mirrors the Gibbs conditional with the counts and
arrival times replaced by their expectations, which makes the two inference
routes easy to cross-check.

The evaluatable lower bound (ELBO) is assembled explicitly from the expected
complete-data log likelihood, the Gamma prior, and the entropies of the three
factors; every update must increase it, and any decrease beyond numerical
slack is treated as a bug.

q(Z_i) is taken to be Exp(W_i . sum_l <lam_l>), the normalized form
consistent with the ``<z_i>`` update; this reading is flagged in the project
notes. Everything here is deterministic: no RNG is used.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidParameterError, NumericError
from .model import Dataset, FeatureMap, PLWeights, class_probabilities, transform
from .em import EMConfig

__all__ = ["VariationalState", "init_state", "vb_update", "elbo", "fit_vb",
           "type2_ml_a", "vb_predict"]


@dataclass
class VariationalState:
    rho: np.ndarray        # (n, p) responsibilities of q(C), supported on k = y_i
    a_kj: np.ndarray       # (K, p) Gamma shape of q(lam)
    b_kj: np.ndarray       # (K, p) Gamma rate of q(lam)
    z_mean: np.ndarray     # (n,) <z_i> under q(Z)
    elbo_trace: list = field(default_factory=list)

    @property
    def lam_mean(self) -> np.ndarray:
        return self.a_kj / self.b_kj

    def weights(self, hyper_a: float, hyper_b: float) -> PLWeights:
        """Plug-in point estimate <lam> packaged for prediction."""
        return PLWeights(self.lam_mean, hyper_a, hyper_b)


def init_state(data: Dataset, fmap: FeatureMap, hyper_a: float, hyper_b: float) -> VariationalState:
    """Prior-matched Gamma factors, uniform responsibilities; deterministic."""
    K, p, n = data.n_classes, fmap.p, data.n
    a_kj = np.full((K, p), float(hyper_a))
    b_kj = np.full((K, p), float(hyper_b))
    rho = np.full((n, p), 1.0 / p)
    W = transform(data.X, fmap)
    z_mean = 1.0 / (W @ (a_kj / b_kj).sum(axis=0))
    return VariationalState(rho, a_kj, b_kj, z_mean)


def vb_update(state: VariationalState, data: Dataset, W: np.ndarray,
              hyper_a: float, hyper_b: float) -> VariationalState:
    """One coordinate-ascent cycle: responsibilities and <z>, then Gamma factors."""
    log_lam_mean = special.digamma(state.a_kj) - np.log(state.b_kj)  # <ln lam_kj>
    if not np.all(np.isfinite(log_lam_mean)):
        raise NumericError("non-finite <ln lam> in responsibility update")
    # rho_ij  propto  W_ij exp(<ln lam_{y_i, j}>)
    log_rho = np.log(W) + log_lam_mean[data.y]
    log_rho -= log_rho.max(axis=1, keepdims=True)
    rho = np.exp(log_rho)
    rho /= rho.sum(axis=1, keepdims=True)

    z_mean = 1.0 / (W @ state.lam_mean.sum(axis=0))

    counts = np.zeros_like(state.a_kj)
    np.add.at(counts, data.y, rho)  # <n_kj>
    a_kj = hyper_a + counts
    b_kj = hyper_b + (z_mean @ W)[None, :].repeat(state.a_kj.shape[0], axis=0)
    if not (np.all(np.isfinite(a_kj)) and np.all(np.isfinite(b_kj))):
        raise NumericError("non-finite Gamma parameters in variational update")
    return VariationalState(rho, a_kj, b_kj, z_mean, state.elbo_trace)


def elbo(state: VariationalState, data: Dataset, W: np.ndarray,
         hyper_a: float, hyper_b: float) -> float:
    """The variational lower bound on the log evidence.

    Expected complete-data log likelihood plus expected log prior, plus the
    entropies of q(C) (discrete), q(Z) (exponential) and q(lam) (Gamma).
    """
    a_q, b_q, rho = state.a_kj, state.b_kj, state.rho
    lam_mean = state.lam_mean
    log_lam_mean = special.digamma(a_q) - np.log(b_q)
    counts = np.zeros_like(a_q)
    np.add.at(counts, data.y, rho)
    z_mean = state.z_mean
    zw = z_mean @ W  # (p,)

    e_loglik = float((counts * log_lam_mean).sum()
                     - (lam_mean * zw[None, :]).sum()
                     + (rho * np.log(W)).sum())
    e_logprior = float((a_q.size * (hyper_a * np.log(hyper_b) - special.gammaln(hyper_a)))
                       + ((hyper_a - 1.0) * log_lam_mean - hyper_b * lam_mean).sum())
    h_c = float(-special.xlogy(rho, rho).sum())
    h_z = float((1.0 + np.log(z_mean)).sum())  # Exp(rate r): H = 1 - ln r
    h_lam = float((a_q - np.log(b_q) + special.gammaln(a_q)
                   + (1.0 - a_q) * special.digamma(a_q)).sum())
    value = e_loglik + e_logprior + h_c + h_z + h_lam
    if not np.isfinite(value):
        raise NumericError("non-finite ELBO")
    return value


def fit_vb(data: Dataset, fmap: FeatureMap, hyper_a: float, hyper_b: float,
           config: EMConfig = EMConfig(), init: VariationalState | None = None) -> VariationalState:
    """Cycle updates until the relative ELBO change drops below tolerance."""
    if hyper_a <= 0 or hyper_b <= 0:
        raise InvalidParameterError("need hyper_a > 0 and hyper_b > 0")
    W = transform(data.X, fmap)
    state = init if init is not None else init_state(data, fmap, hyper_a, hyper_b)
    state = VariationalState(state.rho, state.a_kj, state.b_kj, state.z_mean, [])
    prev = -np.inf
    for _ in range(config.max_iters):
        state = vb_update(state, data, W, hyper_a, hyper_b)
        value = elbo(state, data, W, hyper_a, hyper_b)
        state.elbo_trace.append(value)
        if np.isfinite(prev) and abs(value - prev) <= config.rel_tol * max(1.0, abs(value)):
            break
        prev = value
    return state


def vb_predict(state: VariationalState, W_new, hyper_a: float, hyper_b: float,
               mc_draws: int = 0, rng=None) -> np.ndarray:
    """Class probabilities from the variational posterior.

    Default is the plug-in rule using <lam>; pass ``mc_draws > 0`` (with an
    RngStream) to average over Gamma draws from q(lam) instead.
    """
    if mc_draws > 0:
        if rng is None:
            raise InvalidParameterError("Monte-Carlo averaging needs an RngStream")
        W_new = np.asarray(W_new, dtype=float)
        single = W_new.ndim == 1
        Wm = W_new[None, :] if single else W_new
        acc = np.zeros((Wm.shape[0], state.a_kj.shape[0]))
        for _ in range(mc_draws):
            lam = rng.generator.gamma(state.a_kj) / state.b_kj
            scores = Wm @ lam.T
            acc += scores / scores.sum(axis=1, keepdims=True)
        probs = acc / mc_draws
        return probs[0] if single else probs
    return class_probabilities(W_new, state.weights(hyper_a, hyper_b))


def _fit_and_score(data, fmap, W, a, hyper_b, config, warm):
    state = fit_vb(data, fmap, a, hyper_b, config, init=warm)
    score = elbo(state, data, W, a, hyper_b) - np.log(a)  # + ln p(a), p(a) ~ 1/a
    return state, score


def type2_ml_a(data: Dataset, fmap: FeatureMap, hyper_b: float,
               config: EMConfig = EMConfig(), a_lo: float = 1e-3, a_hi: float = 1e3,
               ln_tol: float = 1e-3):
    """Estimate the shape ``a`` by maximizing the converged bound plus ``ln p(a)``.

    Golden-section search on ``ln a``; each evaluation warm-starts from the
    previously fitted state. If the coarse bracketing scan puts the maximum at
    an interval endpoint (no interior bracket), falls back to a 25-point
    log-spaced grid scan with a warning.
    """
    if not (0 < a_lo <= a_hi):
        raise InvalidParameterError("need 0 < a_lo <= a_hi")
    W = transform(data.X, fmap)
    cache: dict[float, tuple] = {}
    warm_holder = {"state": None}

    def score_at(ln_a: float):
        a = float(np.exp(ln_a))
        if a not in cache:
            state, sc = _fit_and_score(data, fmap, W, a, hyper_b, config, warm_holder["state"])
            warm_holder["state"] = state
            cache[a] = (state, sc)
        return cache[a][1]

    if a_lo == a_hi:
        state, _ = _fit_and_score(data, fmap, W, a_lo, hyper_b, config, None)
        return a_lo, state

    lo, hi = np.log(a_lo), np.log(a_hi)
    grid = np.linspace(lo, hi, 9)
    vals = [score_at(x) for x in grid]
    best = int(np.argmax(vals))
    if best in (0, len(grid) - 1):
        warnings.warn("type-II ML objective not bracketed in the interior; "
                      "falling back to a 25-point grid scan", stacklevel=2)
        grid = np.linspace(lo, hi, 25)
        vals = [score_at(x) for x in grid]
        best = int(np.argmax(vals))
        a_hat = float(np.exp(grid[best]))
        return a_hat, cache[a_hat][0]

    # golden-section inside the bracketing triplet
    left, right = grid[best - 1], grid[best + 1]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = right - invphi * (right - left)
    d = left + invphi * (right - left)
    fc, fd = score_at(c), score_at(d)
    while right - left > ln_tol:
        if fc >= fd:
            right, d, fd = d, c, fc
            c = right - invphi * (right - left)
            fc = score_at(c)
        else:
            left, c, fc = c, d, fd
            d = left + invphi * (right - left)
            fd = score_at(d)
    ln_best = c if fc >= fd else d
    a_hat = float(np.exp(ln_best))
    return a_hat, cache[a_hat][0]
