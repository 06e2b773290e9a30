"""CSV ingestion, standardization, deterministic splits and evaluation metrics."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.metrics import accuracy_score, f1_score, roc_auc_score
from sklearn.model_selection import train_test_split
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import (
    DegenerateFeatureError,
    ParseError,
    SchemaError,
    UndefinedMetricError,
)

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class FeatureStats:
    name: str
    min: float
    max: float
    mean: float
    std: float  # population
    q33: float
    q66: float

    @classmethod
    def from_column(cls, name, col):
        col = np.asarray(col, dtype=np.float64)
        q33, q66 = np.quantile(col, [1 / 3, 2 / 3])
        return cls(name, float(col.min()), float(col.max()), float(col.mean()),
                   float(col.std()), float(q33), float(q66))

    def label(self, value) -> str:
        """Tercile label of a value in original feature units."""
        if value < self.q33:
            return "LOW"
        if value > self.q66:
            return "HIGH"
        return "MED"


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list
    target_name: str
    task: str
    classes: Optional[list] = None  # original class labels, index = encoded value

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def stats(self) -> list:
        return feature_stats(self.X, self.feature_names)

    def subset(self, idx):
        return replace(self, X=self.X[idx], y=self.y[idx])


def feature_stats(X, names) -> list:
    return [FeatureStats.from_column(n, X[:, i]) for i, n in enumerate(names)]


def load_csv(path, target, task=REGRESSION) -> Dataset:
    """Read a headered, comma-separated file into a :class:`Dataset`.

    Classification targets are encoded 0..C-1 in order of first appearance.
    Row numbers in errors count data rows from 1 (the header is line 1).
    """
    if task not in (REGRESSION, CLASSIFICATION):
        raise SchemaError(f"unknown task {task!r}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if target not in header:
            raise SchemaError(f"{path}: target column {target!r} not in header {header}")
        t = header.index(target)
        names = [h for i, h in enumerate(header) if i != t]
        rows, labels = [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {row_no} (line {row_no + 1}) has {len(row)} cells, expected {len(header)}",
                    row_no)
            feats = []
            for i, cell in enumerate(row):
                if i == t:
                    continue
                feats.append(_parse_cell(cell, path, row_no, header[i]))
            rows.append(feats)
            if task == REGRESSION:
                labels.append(_parse_cell(row[t], path, row_no, target))
            else:
                label = row[t].strip()
                if not label:
                    raise ParseError(f"{path}: row {row_no} (line {row_no + 1}) has an empty target", row_no)
                labels.append(label)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    X = np.array(rows, dtype=np.float64)
    classes = None
    if task == CLASSIFICATION:
        classes = list(dict.fromkeys(labels))
        index = {c: i for i, c in enumerate(classes)}
        y = np.array([index[c] for c in labels], dtype=np.int64)
    else:
        y = np.array(labels, dtype=np.float64)
    return Dataset(X, y, names, target, task, classes)


def _parse_cell(cell, path, row_no, column):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(
            f"{path}: row {row_no} (line {row_no + 1}), column {column!r}: cannot parse {cell!r}",
            row_no) from None
    if not math.isfinite(v):
        raise ParseError(f"{path}: row {row_no} (line {row_no + 1}), column {column!r}: non-finite value", row_no)
    return v


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 42
    stratify: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise SchemaError("train_fraction must lie in (0, 1)")


def split(ds: Dataset, spec: SplitSpec = SplitSpec()):
    """Deterministic train/test split; stratified for classification."""
    idx = np.arange(ds.n_samples)
    strat = ds.y if (spec.stratify and ds.task == CLASSIFICATION) else None
    tr, te = train_test_split(idx, train_size=spec.train_fraction,
                              random_state=spec.seed, stratify=strat)
    return ds.subset(np.sort(tr)), ds.subset(np.sort(te))


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-column zero-mean, unit-variance map using the population std.

    Unlike sklearn's ``StandardScaler`` a constant column is an error, not a
    silent unit scale.
    """

    def __init__(self, feature_names=None):
        self.feature_names = feature_names

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        std = X.std(axis=0)
        bad = np.flatnonzero(std <= 0)
        if bad.size:
            names = self.feature_names or [f"x{i}" for i in range(X.shape[1])]
            raise DegenerateFeatureError(
                "constant feature(s): " + ", ".join(str(names[i]) for i in bad))
        self.mean_ = X.mean(axis=0)
        self.scale_ = std
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, Z):
        check_is_fitted(self)
        return np.asarray(Z, dtype=np.float64) * self.scale_ + self.mean_

    @classmethod
    def from_arrays(cls, mean, scale):
        obj = cls()
        obj.mean_ = np.asarray(mean, dtype=np.float64)
        obj.scale_ = np.asarray(scale, dtype=np.float64)
        obj.n_features_in_ = obj.mean_.size
        return obj


def standardize(ds: Dataset):
    """Standardize features; returns the new dataset and the fitted transform."""
    scaler = Standardizer(ds.feature_names).fit(ds.X)
    return replace(ds, X=scaler.transform(ds.X)), scaler


# -- metrics ------------------------------------------------------------------


def metrics_regression(y_pred, y_true) -> dict:
    """MAPE (percent), RMSE and MAE. MAPE is NaN (with a warning) if any target is 0."""
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    if y_pred.shape != y_true.shape or y_true.size == 0:
        raise ValueError("predictions and targets must be non-empty and equally long")
    err = y_pred - y_true
    if np.any(y_true == 0):
        warnings.warn("MAPE undefined: zero-valued target", RuntimeWarning, stacklevel=2)
        mape = float("nan")
    else:
        mape = float(100.0 * np.mean(np.abs(err) / np.abs(y_true)))
    return {"MAPE": mape, "RMSE": float(np.sqrt(np.mean(err * err))), "MAE": float(np.mean(np.abs(err)))}


def auroc(scores, positive) -> float:
    positive = np.asarray(positive, dtype=bool)
    if positive.all() or not positive.any():
        raise UndefinedMetricError("AUROC needs both positive and negative samples")
    return float(roc_auc_score(positive, scores))


def metrics_classification(probs, labels, y_true) -> dict:
    """Accuracy, support-weighted F1 and AUROC (one-vs-rest macro for C > 2)."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    y_true = np.asarray(y_true)
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-6):
        raise ValueError("probability rows must sum to 1")
    present = np.unique(y_true)
    if present.size < 2:
        raise UndefinedMetricError("AUROC undefined for a single-class target")
    if probs.shape[1] == 2:
        auc = auroc(probs[:, 1], y_true == 1)
    else:
        auc = float(np.mean([auroc(probs[:, c], y_true == c) for c in present]))
    return {
        "ACC": float(accuracy_score(y_true, labels)),
        "F1": float(f1_score(y_true, labels, average="weighted", zero_division=0)),
        "AUROC": auc,
    }


def format_metrics(metrics: dict) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in metrics.items())


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_metrics(metrics: dict, path_txt=None, path_json=None):
    if path_txt is not None:
        with open(path_txt, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_metrics(metrics))
    if path_json is not None:
        with open(path_json, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({k: (None if isinstance(v, float) and math.isnan(v) else v)
                       for k, v in metrics.items()}, fh, indent=1, sort_keys=True)
            fh.write("\n")
