"""Core model objects: datasets, feature transforms and the Plackett-Luce likelihood.

Class probabilities are score shares: ``Pr(Y = k | W) = W . lam_k / sum_l W . lam_l``
with non-negative weights ``lam`` acting on a strictly positive transformed
feature vector ``W``. The module also provides the exponential-race simulator
used as an independent oracle for that formula, the admixture decomposition of
the likelihood, and the complete-data log likelihood over the latent
``(C, Z)`` variables.

Labels are 1-based in all external interfaces and 0-based internally;
conversion happens at the I/O boundary only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateWeightsError,
    InvalidParameterError,
    TransformOverflowError,
)
from .rng import RngStream

__all__ = [
    "Dataset",
    "FeatureMap",
    "PLWeights",
    "AugmentedState",
    "transform",
    "class_probabilities",
    "race_oracle",
    "mixture_weights",
    "log_complete_likelihood",
]


@dataclass(frozen=True)
class Dataset:
    """Covariates ``X`` (n x d) and 0-based integer labels ``y`` in {0, ..., K-1}."""

    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        if X.ndim != 2:
            raise InvalidParameterError("X must be a 2-D array")
        if y.shape != (X.shape[0],):
            raise InvalidParameterError("y must have one label per row of X")
        if not np.all(np.isfinite(X)):
            raise InvalidParameterError("X contains non-finite entries")
        if self.n_classes < 1:
            raise InvalidParameterError("n_classes must be >= 1")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise InvalidParameterError("labels must lie in {0, ..., K-1}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def empty_classes(self) -> list[int]:
        """Class indices with no observations (permitted but worth flagging)."""
        counts = np.bincount(self.y, minlength=self.n_classes)
        return [int(k) for k in np.flatnonzero(counts == 0)]


@dataclass(frozen=True)
class FeatureMap:
    """Ordered list of transforms applied to a covariate row.

    Each term is a dict: ``{"kind": "exp", "sign": +1 | -1, "cols": [j, ...]}``
    for ``exp(+-(X_j + X_l + ...))`` or ``{"kind": "offset"}`` for the constant
    feature ``exp(0) = 1``. All outputs are strictly positive for finite input.
    """

    terms: tuple = ()

    @staticmethod
    def default(d: int, interactions: tuple = ()) -> "FeatureMap":
        """The default map: exp(X_j), exp(-X_j) for each covariate, plus an offset.

        ``interactions`` is a sequence of column tuples; each adds the pair
        ``exp(+sum)``, ``exp(-sum)``.
        """
        terms = [{"kind": "exp", "sign": 1, "cols": [j]} for j in range(d)]
        terms += [{"kind": "exp", "sign": -1, "cols": [j]} for j in range(d)]
        terms.append({"kind": "offset"})
        for cols in interactions:
            terms.append({"kind": "exp", "sign": 1, "cols": list(cols)})
            terms.append({"kind": "exp", "sign": -1, "cols": list(cols)})
        return FeatureMap(tuple(_freeze(t) for t in terms))

    @property
    def p(self) -> int:
        return len(self.terms)

    def to_spec(self) -> list:
        """JSON-serializable description of the map."""
        return [dict(t) for t in self.terms]

    @staticmethod
    def from_spec(spec: list) -> "FeatureMap":
        terms = []
        for t in spec:
            kind = t.get("kind")
            if kind == "offset":
                terms.append({"kind": "offset"})
            elif kind == "exp":
                terms.append({"kind": "exp", "sign": int(t["sign"]), "cols": [int(c) for c in t["cols"]]})
            else:
                raise InvalidParameterError(f"unknown feature-map term kind: {kind!r}")
        return FeatureMap(tuple(_freeze(t) for t in terms))


class _FrozenTerm(dict):
    def __hash__(self):  # terms live inside a frozen dataclass tuple
        return hash(repr(sorted(self.items())))


def _freeze(term: dict) -> _FrozenTerm:
    t = dict(term)
    if "cols" in t:
        t["cols"] = tuple(t["cols"])
    return _FrozenTerm(t)


def transform(X, fmap: FeatureMap) -> np.ndarray:
    """Apply the feature map to one row (d-vector) or a matrix (n x d).

    Fails loudly on overflow to non-finite values, naming the offending
    covariates; standardizing the covariates is the documented remedy.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    Xm = X[None, :] if single else X
    if not np.all(np.isfinite(Xm)):
        raise InvalidParameterError("covariates must be finite")
    n = Xm.shape[0]
    W = np.empty((n, fmap.p))
    for j, t in enumerate(fmap.terms):
        if t["kind"] == "offset":
            W[:, j] = 1.0
        else:
            s = sum(Xm[:, c] for c in t["cols"])
            with np.errstate(over="ignore"):  # overflow is caught and raised below
                W[:, j] = np.exp(t["sign"] * s)
    bad = ~np.isfinite(W)
    if bad.any():
        j = int(np.flatnonzero(bad.any(axis=0))[0])
        raise TransformOverflowError(
            f"feature {j} ({dict(fmap.terms[j])}) overflowed; consider standardizing covariates"
        )
    return W[0] if single else W


@dataclass(frozen=True)
class PLWeights:
    """Non-negative weight matrix ``lam`` (K x p) with its Gamma hyperparameters."""

    lam: np.ndarray
    hyper_a: float = 1.0
    hyper_b: float = 1.0

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 2:
            raise InvalidParameterError("lam must be a K x p matrix")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise InvalidParameterError("lam entries must be finite and >= 0")
        if self.hyper_a <= 0 or self.hyper_b < 0:
            # b = 0 is the improper flat-rate limit used by the MLE special case
            raise InvalidParameterError("need hyper_a > 0 and hyper_b >= 0")
        object.__setattr__(self, "lam", lam)

    @property
    def n_classes(self) -> int:
        return self.lam.shape[0]

    @property
    def p(self) -> int:
        return self.lam.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.lam.sum())

    def normalized(self) -> np.ndarray:
        """The normalized view lam / Lambda, summing to 1 over all K*p entries."""
        total = self.total_mass
        if total <= 0:
            raise DegenerateWeightsError("total mass is zero; normalized weights undefined")
        return self.lam / total


@dataclass(frozen=True)
class AugmentedState:
    """Latent winning-feature indices ``C`` and winner arrival times ``Z``."""

    C: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=int)
        Z = np.asarray(self.Z, dtype=float)
        if C.shape != Z.shape or C.ndim != 1:
            raise InvalidParameterError("C and Z must be 1-D arrays of equal length")
        if np.any(Z <= 0):
            raise InvalidParameterError("arrival times Z must be strictly positive")
        if C.size and C.min() < 0:
            raise InvalidParameterError("feature indices C must be non-negative")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "Z", Z)


def _scores(W: np.ndarray, lam: np.ndarray) -> np.ndarray:
    return W @ lam.T


def class_probabilities(W, weights: PLWeights) -> np.ndarray:
    """Class probabilities ``W . lam_k / sum_l W . lam_l`` for one W row or a matrix."""
    W = np.asarray(W, dtype=float)
    single = W.ndim == 1
    scores = _scores(W[None, :] if single else W, weights.lam)
    totals = scores.sum(axis=1)
    if np.any(totals <= 0):
        raise DegenerateWeightsError("all class scores are zero for at least one observation")
    probs = scores / totals[:, None]
    return probs[0] if single else probs


def race_oracle(W, weights: PLWeights, draws: int, rng: RngStream) -> np.ndarray:
    """Empirical winning frequencies of the exponential race.

    Simulates arrival times ``V_kj ~ Exp(W_j lam_kj)`` and records which class
    holds the overall minimum; entries with ``lam_kj = 0`` never win. This is
    the model's independent correctness oracle: the frequencies converge to
    :func:`class_probabilities` as ``draws`` grows.
    """
    if draws < 1:
        raise InvalidParameterError("draws must be >= 1")
    W = np.asarray(W, dtype=float)
    rates = W[None, :] * weights.lam  # (K, p)
    if rates.sum() <= 0:
        raise DegenerateWeightsError("all arrival rates are zero")
    K, p = rates.shape
    counts = np.zeros(K, dtype=np.int64)
    chunk = 1 << 17
    remaining = draws
    with np.errstate(divide="ignore"):
        inv_rates = np.where(rates > 0, 1.0 / rates, np.inf)  # zero rate: never arrives
    while remaining > 0:
        m = min(chunk, remaining)
        V = rng.generator.exponential(size=(m, K, p)) * inv_rates[None, :, :]
        winners = np.argmin(V.min(axis=2), axis=1)
        counts += np.bincount(winners, minlength=K)
        remaining -= m
    return counts / draws


def mixture_weights(W, weights: PLWeights) -> np.ndarray:
    """Admixture weights ``pi_j = W_j sum_k lam_kj / (W . sum_l lam_l)``."""
    W = np.asarray(W, dtype=float)
    col_mass = weights.lam.sum(axis=0)  # (p,)
    raw = W * col_mass
    total = raw.sum()
    if total <= 0:
        raise DegenerateWeightsError("mixture weights undefined: total score is zero")
    return raw / total


def log_complete_likelihood(
    data: Dataset, fmap: FeatureMap, weights: PLWeights, aug: AugmentedState
) -> float:
    """The complete-data log likelihood over ``(Y, C, Z)`` given ``lam``.

    ``sum_kj { n_kj ln lam_kj - lam_kj sum_i Z_i W_ij } + sum_i ln W_{i, C_i}``
    with ``n_kj = #{i : Y_i = k, C_i = j}``. Terms with ``n_kj = 0`` and
    ``lam_kj = 0`` contribute zero; ``n_kj > 0`` with ``lam_kj = 0`` yields
    ``-inf`` (a documented sentinel, not an error).
    """
    W = transform(data.X, fmap)
    lam = weights.lam
    K, p = lam.shape
    n_kj = np.zeros((K, p))
    np.add.at(n_kj, (data.y, aug.C), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lam = np.log(lam)
    count_term = np.where(n_kj > 0, n_kj * log_lam, 0.0)
    if np.any(np.isneginf(count_term)):
        return float("-inf")
    zw = aug.Z @ W  # (p,)
    penalty = float((lam * zw[None, :]).sum())
    w_term = float(np.log(W[np.arange(data.n), aug.C]).sum())
    return float(count_term.sum()) - penalty + w_term
