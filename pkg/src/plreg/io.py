"""CSV ingestion, model artifacts, and config handling for the CLI.

A model artifact is a JSON document holding everything needed for
reproducible prediction: feature-map spec, standardization statistics, label
mapping, hyperparameters, seed, and either the fitted weights (EM / VB), a
reference to a chain CSV (Gibbs / baseline), or the variational parameters.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import __version__
from .errors import InvalidParameterError, ParseError
from .model import Dataset, FeatureMap

MODEL_SCHEMA_VERSION = 1
SEED_ENV_VAR = "PLREG_SEED"


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @staticmethod
    def from_json(obj) -> "Standardizer | None":
        if obj is None:
            return None
        return Standardizer(np.asarray(obj["mean"]), np.asarray(obj["std"]))

    @staticmethod
    def fit(X: np.ndarray) -> "Standardizer":
        sd = X.std(axis=0)
        return Standardizer(X.mean(axis=0), np.where(sd > 0, sd, 1.0))


@dataclass
class LoadedData:
    dataset: Dataset
    label_mapping: list            # position k holds the external label of class k+1
    feature_names: list
    standardizer: Standardizer | None = None


def load_csv(path, label_column: str, standardize: bool = False,
             standardizer: Standardizer | None = None,
             allow_single_class: bool = False) -> LoadedData:
    """Read a headered CSV into a Dataset.

    Labels map to {1..K} by first appearance (0-based internally); the mapping
    is recorded so predictions can report original labels. Missing or
    non-numeric covariate cells raise a parse error naming the row and column.
    """
    if not os.path.exists(path):
        raise ParseError(f"no such file: {path}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise ParseError(f"could not read {path}: {exc}") from exc
    if label_column not in frame.columns:
        raise ParseError(f"label column {label_column!r} not found in {path}; "
                         f"columns are {list(frame.columns)}")
    covars = frame.drop(columns=[label_column])
    for col in covars.columns:
        converted = pd.to_numeric(covars[col], errors="coerce")
        bad = converted.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"missing or non-numeric cell at row {row + 1}, "
                             f"column {col!r}")
        covars[col] = converted
    X = covars.to_numpy(dtype=float)

    raw_labels = frame[label_column].tolist()
    mapping: list = []
    seen: dict = {}
    y = np.empty(len(raw_labels), dtype=int)
    for i, lbl in enumerate(raw_labels):
        if pd.isna(lbl):
            raise ParseError(f"missing label at row {i + 1}")
        if lbl not in seen:
            seen[lbl] = len(mapping)
            mapping.append(lbl)
        y[i] = seen[lbl]
    if len(mapping) < 2 and not allow_single_class:
        raise ParseError(f"{path} holds a single class ({mapping[0]!r}); "
                         "training needs at least two")

    std = standardizer
    if standardize and std is None:
        std = Standardizer.fit(X)
    if std is not None:
        X = std.apply(X)
    return LoadedData(Dataset(X, y, len(mapping)), mapping, list(covars.columns), std)


def model_to_json(kind: str, fmap: FeatureMap, label_mapping: list,
                  hyper: dict, seed, standardizer: Standardizer | None = None,
                  lam_bar: np.ndarray | None = None, total_mass: float | None = None,
                  chain_path: str | None = None, variational: dict | None = None,
                  extra: dict | None = None) -> dict:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "library_version": __version__,
        "kind": kind,
        "feature_map": fmap.to_spec() if fmap is not None else None,
        "label_mapping": label_mapping,
        "standardization": standardizer.to_json() if standardizer else None,
        "hyperparameters": hyper,
        "seed": seed,
    }
    if lam_bar is not None:
        doc["lambda_bar"] = np.asarray(lam_bar).tolist()
    if total_mass is not None:
        doc["total_mass"] = float(total_mass)
    if chain_path is not None:
        doc["chain_csv"] = chain_path
    if variational is not None:
        doc["variational"] = variational
    if extra:
        doc.update(extra)
    return doc


def write_model(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_model(path) -> dict:
    if not os.path.exists(path):
        raise ParseError(f"no such model file: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ParseError(f"unsupported model schema version {doc.get('schema_version')!r}")
    return doc


def load_config(path, allowed_keys) -> dict:
    """JSON config file; unknown keys are rejected."""
    if not os.path.exists(path):
        raise ParseError(f"no such config file: {path}")
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ParseError("config file must hold a JSON object")
    unknown = set(cfg) - set(allowed_keys)
    if unknown:
        raise ParseError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def default_seed() -> int:
    value = os.environ.get(SEED_ENV_VAR)
    if value is None:
        return 0
    try:
        return int(value)
    except ValueError as exc:
        raise InvalidParameterError(f"{SEED_ENV_VAR} must be an integer, got {value!r}") from exc
