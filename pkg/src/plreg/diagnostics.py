"""MCMC-efficiency diagnostics, classification metrics, regularization paths
and the comparative benchmark harness.

ESS uses the initial monotone sequence estimator: autocovariances (biased,
denominator N) are paired lag-by-lag, accumulated while the pair sums stay
positive, and forced non-increasing by running minima. Raw ESS can exceed N
for antithetic chains, so reports clamp to [1, N].

The benchmark harness produces two comparison tables: mean and
standard deviation of test misclassification over seeded stratified splits,
plus per-method minimum ESS, sampling time, time per effective sample, and
the relative-speed ratio against the first method.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvalidParameterError, UndefinedMetricError
from .model import Dataset, FeatureMap, class_probabilities, transform
from .em import EMConfig, fit_map
from .gibbs import Chain, GibbsConfig, posterior_predict, posterior_summaries, run_chain
from .vb import fit_vb, vb_predict
from .rng import RngStream

__all__ = [
    "EssReport", "RegPath", "ess", "min_ess_report", "misclassification",
    "roc_auc", "regularization_path", "benchmark", "BenchmarkResult",
]


def ess(draws) -> float:
    """Effective sample size of a scalar chain, N / (1 + 2 sum_k gamma(k)).

    The autocorrelation sum is truncated by the initial-monotone-sequence
    rule. A constant series returns 1 by convention.
    """
    x = np.asarray(draws, dtype=float)
    if x.ndim != 1 or x.size < 10:
        raise InsufficientDataError("need a 1-D series of at least 10 values")
    if not np.all(np.isfinite(x)):
        raise InsufficientDataError("series contains non-finite values")
    n = x.size
    x = x - x.mean()
    var = x @ x / n
    if var == 0:
        return 1.0
    # biased autocovariances via FFT, denominator n
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n] / n
    rho = acov / acov[0]

    tau = 0.0  # running sum_k>=1 rho(k) after Geyer truncation
    running_min = np.inf
    pair_sum0 = None
    m_idx = 0
    while True:
        k1, k2 = 2 * m_idx, 2 * m_idx + 1
        if k1 >= n:
            break
        gamma_pair = rho[k1] + (rho[k2] if k2 < n else 0.0)
        if gamma_pair <= 0:
            break
        running_min = min(running_min, gamma_pair)
        gamma_pair = running_min
        if pair_sum0 is None:
            pair_sum0 = gamma_pair  # contains rho(0) = 1
            tau += gamma_pair - 1.0
        else:
            tau += gamma_pair
        m_idx += 1
    denom = 1.0 + 2.0 * tau
    if denom <= 0:
        return float(n)
    return float(n / denom)


@dataclass
class EssReport:
    ess_values: np.ndarray
    min_ess: float
    wall_time: float
    time_per_ess: float
    relative_speed: float | None = None
    coordinate_names: list = field(default_factory=list)


def min_ess_report(chain: Chain, wall_time: float | None = None,
                   reference: EssReport | None = None) -> EssReport:
    """Per-coordinate ESS of a chain with the minimum, time/ESS and, when a
    reference report is given, the relative-speed ratio (reference time/ESS
    divided by this chain's)."""
    if chain.n_draws == 0:
        raise InsufficientDataError("chain holds no draws")
    if wall_time is None:
        wall_time = chain.sample_time
    flat = chain.flat_draws()
    values = np.array([ess(np.ascontiguousarray(flat[:, c])) for c in range(flat.shape[1])])
    values = np.clip(values, 1.0, chain.n_draws)
    min_ess = float(values.min())
    tpe = wall_time / min_ess
    rel = None
    if reference is not None:
        rel = reference.time_per_ess / tpe
    return EssReport(values, min_ess, wall_time, tpe, rel, chain.coordinate_names())


def misclassification(predictions, labels) -> float:
    """Fraction of rows whose argmax class differs from the label.

    Argmax ties break toward the smallest class index.
    """
    P = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=int)
    if P.ndim != 2 or P.shape[0] != y.shape[0]:
        raise InvalidParameterError("predictions must be (n, K) with one label per row")
    if not np.allclose(P.sum(axis=1), 1.0, atol=1e-6):
        raise InvalidParameterError("prediction rows must sum to 1")
    return float(np.mean(np.argmax(P, axis=1) != y))


def roc_auc(scores, labels):
    """ROC curve points and trapezoid AUC for binary labels (positive = 1)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    npos, nneg = int((y == 1).sum()), int((y == 0).sum())
    if npos == 0 or nneg == 0:
        raise UndefinedMetricError("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    ys = y[order]
    tps = np.cumsum(ys == 1)
    fps = np.cumsum(ys == 0)
    # collapse tied scores: keep the last point of each distinct score value
    distinct = np.r_[np.diff(s[order]) != 0, True]
    tpr = np.r_[0.0, tps[distinct] / npos]
    fpr = np.r_[0.0, fps[distinct] / nneg]
    auc = float(np.trapezoid(tpr, fpr))
    return {"fpr": fpr, "tpr": tpr, "auc": auc}


@dataclass
class RegPath:
    a_grid: np.ndarray                 # strictly decreasing
    coefficients: list                 # per-a normalized (K, p) matrix or None on failure
    estimator: str                     # map | gibbs-mean | gibbs-median | vb-mean
    zero_counts: list = field(default_factory=list)   # map only
    failures: dict = field(default_factory=dict)      # a -> error message

    def to_long_rows(self):
        """Long-format rows (a, class, feature, value, estimator) for export."""
        rows = []
        for a, coef in zip(self.a_grid, self.coefficients):
            if coef is None:
                continue
            K, p = coef.shape
            for k in range(K):
                for j in range(p):
                    rows.append((float(a), k + 1, j + 1, float(coef[k, j]), self.estimator))
        return rows


_ESTIMATORS = ("map", "gibbs-mean", "gibbs-median", "vb-mean")


def regularization_path(data: Dataset, fmap: FeatureMap, a_grid, estimator: str,
                        hyper_b: float = 1.0, config=None,
                        rng: RngStream | None = None) -> RegPath:
    """Fit the chosen estimator along a descending grid of shape values ``a``.

    map and vb-mean are warm-started from the previous grid point; per-point
    failures are recorded without aborting the path. Coefficients are
    reported normalized (lam / Lambda) so scales are comparable across ``a``.
    """
    a_grid = np.asarray(a_grid, dtype=float)
    if a_grid.size == 0 or np.any(a_grid <= 0) or np.any(np.diff(a_grid) >= 0):
        raise InvalidParameterError("a_grid must be positive and strictly decreasing")
    if estimator not in _ESTIMATORS:
        raise InvalidParameterError(f"estimator must be one of {_ESTIMATORS}")

    path = RegPath(a_grid, [], estimator)
    warm = None
    for a in a_grid:
        try:
            if estimator == "map":
                cfg = config or EMConfig()
                trace = fit_map(data, fmap, a, hyper_b, cfg, rng, init_lam=warm)
                lam = trace.weights.lam
                warm = np.maximum(lam, 0.0)
                coef = lam / lam.sum()
                path.zero_counts.append(len(trace.zero_pattern))
            elif estimator == "vb-mean":
                cfg = config or EMConfig()
                state = fit_vb(data, fmap, a, hyper_b, cfg, init=warm)
                warm = state
                lam = state.lam_mean
                coef = lam / lam.sum()
            else:
                cfg = config or GibbsConfig()
                chain = run_chain(data, fmap, a, hyper_b, cfg,
                                  rng.substream(int(a * 1e6)) if rng else None)
                summ = posterior_summaries(chain)
                coef = summ["mean"] if estimator == "gibbs-mean" else summ["median"]
                coef = coef / coef.sum()
            path.coefficients.append(coef)
        except Exception as exc:  # record and continue along the grid
            path.coefficients.append(None)
            if estimator == "map":
                path.zero_counts.append(None)
            path.failures[float(a)] = f"{type(exc).__name__}: {exc}"
    return path


@dataclass
class BenchmarkResult:
    """Per (dataset, method) aggregate of the replicated-split study."""

    rows: list  # dicts with dataset/method/mean/std/ess info

    def to_misclassification_table(self) -> str:
        datasets = sorted({r["dataset"] for r in self.rows})
        methods = [r["method"] for r in self.rows if r["dataset"] == datasets[0]]
        lines = ["Dataset\t" + "\t".join(methods)]
        for ds in datasets:
            cells = []
            for m in methods:
                r = next((r for r in self.rows if r["dataset"] == ds and r["method"] == m), None)
                if r is None or r.get("error"):
                    cells.append("failed")
                else:
                    cells.append(f"{r['mean_misclass']:.3f} ({r['std_misclass']:.3f})")
            lines.append(ds + "\t" + "\t".join(cells))
        return "\n".join(lines)

    def to_efficiency_table(self) -> str:
        lines = ["Dataset\tMethod\tTime\tESS\tTime/ESS\tRelat. Speed"]
        for ds in sorted({r["dataset"] for r in self.rows}):
            group = [r for r in self.rows if r["dataset"] == ds and r.get("min_ess") is not None]
            if not group:
                continue
            worst_tpe = max(r["time_per_ess"] for r in group)
            for r in group:
                rel = worst_tpe / r["time_per_ess"]
                lines.append(f"{ds}\t{r['method']}\t{r['sample_time']:.1f}\t"
                             f"{r['min_ess']:.0f}\t{r['time_per_ess']:.3f}\t{rel:.0f}")
        return "\n".join(lines)


def stratified_split(y: np.ndarray, train_fraction: float, rng: RngStream):
    """Per-class random split; guarantees at least one training row per class."""
    train_idx, test_idx = [], []
    for k in np.unique(y):
        idx = np.flatnonzero(y == k)
        idx = idx[rng.generator.permutation(idx.size)]
        cut = max(1, int(round(train_fraction * idx.size)))
        cut = min(cut, idx.size - 1) if idx.size > 1 else cut
        train_idx.append(idx[:cut])
        test_idx.append(idx[cut:])
    return np.concatenate(train_idx), np.concatenate(test_idx)


def _standardize(train_X, test_X):
    mu = train_X.mean(axis=0)
    sd = train_X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (train_X - mu) / sd, (test_X - mu) / sd


def _run_method(method: str, train: Dataset, test_W_or_X, hyper_a, hyper_b,
                gibbs_config, em_config, logit_config, fmap, rng):
    """Returns (test probabilities, chain or None)."""
    if method == "pl-gibbs":
        chain = run_chain(train, fmap, hyper_a, hyper_b, gibbs_config, rng)
        return posterior_predict(chain, test_W_or_X), chain
    if method == "pl-em":
        trace = fit_map(train, fmap, hyper_a, hyper_b, em_config, rng)
        return class_probabilities(test_W_or_X, trace.weights), None
    if method == "pl-vb":
        state = fit_vb(train, fmap, hyper_a, hyper_b, em_config)
        return vb_predict(state, test_W_or_X, hyper_a, hyper_b), None
    if method == "sparse-logit":
        from .sparse_logit import logit_posterior_predict, run_logit_chain
        chain = run_logit_chain(train, logit_config, rng)
        return logit_posterior_predict(chain, test_W_or_X,
                                       add_intercept=logit_config.add_intercept), chain
    raise InvalidParameterError(f"unknown method {method!r}")


def benchmark(datasets: dict, methods: list, replications: int = 20,
              split_fraction: float = 2.0 / 3.0, seed: int = 0,
              hyper_a: float = 1.0, hyper_b: float = 1.0,
              gibbs_config: GibbsConfig = GibbsConfig(),
              em_config: EMConfig = EMConfig(),
              logit_config=None, standardize: bool = True,
              feature_maps: dict | None = None,
              compute_ess: bool = True) -> BenchmarkResult:
    """Replicated-split comparison over named datasets and methods.

    ``datasets`` maps name -> Dataset (raw covariates; standardization happens
    per split using training statistics). Deterministic given ``seed``: every
    (dataset, method, replication) cell gets its own derived stream.
    """
    if not datasets or not methods:
        raise InvalidParameterError("need at least one dataset and one method")
    if logit_config is None:
        from .sparse_logit import LogitConfig
        logit_config = LogitConfig(burn_in=gibbs_config.burn_in,
                                   samples=gibbs_config.samples, thin=gibbs_config.thin)
    rows = []
    for d_i, (name, data) in enumerate(sorted(datasets.items())):
        fmap = (feature_maps or {}).get(name) or FeatureMap.default(data.d)
        for m_i, method in enumerate(methods):
            errs, times, chains = [], [], []
            misses = []
            last_error = None
            for rep in range(replications):
                stream = RngStream(seed, d_i * 1_000_000 + m_i * 10_000 + rep)
                tr_idx, te_idx = stratified_split(data.y, split_fraction, stream)
                Xtr, Xte = data.X[tr_idx], data.X[te_idx]
                if standardize:
                    Xtr, Xte = _standardize(Xtr, Xte)
                train = Dataset(Xtr, data.y[tr_idx], data.n_classes)
                ytest = data.y[te_idx]
                try:
                    if method == "sparse-logit":
                        test_feats = Xte
                    else:
                        test_feats = transform(Xte, fmap)
                    probs, chain = _run_method(method, train, test_feats, hyper_a,
                                               hyper_b, gibbs_config, em_config,
                                               logit_config, fmap, stream)
                    misses.append(misclassification(probs, ytest))
                    if chain is not None:
                        chains.append(chain)
                        times.append(chain.sample_time)
                except Exception as exc:
                    last_error = f"{type(exc).__name__}: {exc}"
                    errs.append(rep)
            row = {"dataset": name, "method": method,
                   "replications": replications, "failed_replications": errs,
                   "error": last_error if len(errs) == replications else None}
            if misses:
                row["mean_misclass"] = float(np.mean(misses))
                row["std_misclass"] = float(np.std(misses, ddof=1)) if len(misses) > 1 else 0.0
            if chains and compute_ess:
                reports = [min_ess_report(c) for c in chains]
                row["min_ess"] = float(np.mean([r.min_ess for r in reports]))
                row["sample_time"] = float(np.mean(times))
                row["time_per_ess"] = float(np.mean([r.time_per_ess for r in reports]))
            rows.append(row)
    return BenchmarkResult(rows)
