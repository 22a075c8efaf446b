"""Built-in benchmark datasets and synthetic generators for tests and demos.

iris and wine ship with scikit-learn; pima is not redistributable here, so
``load_builtin("pima")`` expects a CSV (columns: 8 covariates then a binary
label named ``class``) at the path given by the ``PLREG_PIMA_CSV`` environment
variable or ``data/pima.csv`` relative to the working directory.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ParseError
from .model import Dataset
from .rng import RngStream

BUILTIN = ("iris", "wine", "pima")


def pima_csv_path() -> str | None:
    path = os.environ.get("PLREG_PIMA_CSV", os.path.join("data", "pima.csv"))
    return path if os.path.exists(path) else None


def load_builtin(name: str) -> Dataset:
    if name == "iris":
        from sklearn.datasets import load_iris
        bunch = load_iris()
        return Dataset(bunch.data, bunch.target, 3)
    if name == "wine":
        from sklearn.datasets import load_wine
        bunch = load_wine()
        return Dataset(bunch.data, bunch.target, 3)
    if name == "pima":
        path = pima_csv_path()
        if path is None:
            raise ParseError(
                "pima is not bundled; point PLREG_PIMA_CSV at a CSV with the "
                "8 covariate columns and a 'class' label column"
            )
        from .io import load_csv
        return load_csv(path, "class").dataset
    raise ParseError(f"unknown builtin dataset {name!r}; choose from {BUILTIN}")


def synthetic_pl(n: int, d: int, n_classes: int, rng: RngStream,
                 sparsity: float = 0.0, hyper_a: float = 1.0) -> tuple[Dataset, np.ndarray]:
    """Data drawn from the model itself: random lam, standard-normal covariates.

    ``sparsity`` zeroes that fraction of lam entries (at least one positive
    entry per class is kept). Returns the dataset and the true weights.
    """
    from .model import FeatureMap, class_probabilities, transform, PLWeights

    fmap = FeatureMap.default(d)
    p = fmap.p
    lam = rng.generator.gamma(hyper_a, size=(n_classes, p))
    if sparsity > 0:
        mask = rng.generator.random((n_classes, p)) < sparsity
        for k in range(n_classes):
            if mask[k].all():
                mask[k, rng.generator.integers(p)] = False
        lam = np.where(mask, 0.0, lam)
    X = rng.generator.standard_normal((n, d))
    W = transform(X, fmap)
    probs = class_probabilities(W, PLWeights(lam, hyper_a, 1.0))
    u = rng.generator.random(n)
    y = (u[:, None] >= np.cumsum(probs, axis=1)).sum(axis=1)
    return Dataset(X, y, n_classes), lam


def separable_toy(n: int, rng: RngStream) -> Dataset:
    """A linearly separable 2-class, 1-covariate toy problem."""
    half = n // 2
    x0 = rng.generator.normal(-2.0, 0.4, size=half)
    x1 = rng.generator.normal(2.0, 0.4, size=n - half)
    X = np.concatenate([x0, x1])[:, None]
    y = np.r_[np.zeros(half, dtype=int), np.ones(n - half, dtype=int)]
    return Dataset(X, y, 2)
