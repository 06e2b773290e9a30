"""End-to-end runs shared by the command line and the acceptance tests."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import RunConfig, SyntheticSpec, dump_config
from .data import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    feature_stats,
    load_csv,
    metrics_classification,
    metrics_regression,
    split,
    write_metrics,
)
from .errors import ConfigurationError, KanfisError
from .estimator import KANFISClassifier, KANFISRegressor
from .interpret import extract_rules, feature_count_stats
from .training import TrainReport

MODEL_FILE = "model.json"
EPOCH_LOG = "epochs.csv"
METRICS_TXT = "metrics.txt"
METRICS_JSON = "metrics.json"
EFFECTIVE_CONFIG = "effective_config.cfg"


def sparse_regression(spec: SyntheticSpec = SyntheticSpec()) -> Dataset:
    """Uniform inputs on [-2, 2]; the target depends on the first few features only.

    Informative feature ``i`` contributes ``sin(1.5 x)``, ``0.5 x**2`` or
    ``-0.8 x`` for ``i % 3 == 0, 1, 2``; Gaussian noise is added on top.
    """
    if not 1 <= spec.n_informative <= spec.n_features:
        raise ConfigurationError("need 1 <= n_informative <= n_features")
    if spec.n_samples < 2:
        raise ConfigurationError("need at least two samples")
    rng = np.random.default_rng(spec.seed)
    X = rng.uniform(-2.0, 2.0, size=(spec.n_samples, spec.n_features))
    terms = (lambda x: np.sin(1.5 * x), lambda x: 0.5 * x**2, lambda x: -0.8 * x)
    y = sum(terms[i % 3](X[:, i]) for i in range(spec.n_informative))
    y = y + spec.noise * rng.normal(size=spec.n_samples)
    names = [f"x{i}" for i in range(spec.n_features)]
    return Dataset(X, y, names, "y", REGRESSION)


def load_dataset(run: RunConfig) -> Dataset:
    if run.synthetic is not None:
        return sparse_regression(run.synthetic)
    return load_csv(run.data_path, run.target, run.task)


def make_estimator(run: RunConfig):
    t = run.train
    cls = KANFISClassifier if run.task == CLASSIFICATION else KANFISRegressor
    return cls(hidden_layer_sizes=t.hidden, n_bases=t.n_bases, mf=t.mf_family, it2=t.it2,
               lambda_sparse=t.lambda_sparse, lambda_distinct=t.lambda_distinct,
               learning_rate=t.learning_rate, epochs=t.epochs, batch_size=t.batch_size,
               sparse_warmup=t.sparse_warmup, mask_init=t.mask_init, random_state=t.seed)


def evaluate(est, ds: Dataset) -> dict:
    if ds.task == CLASSIFICATION:
        probs = est.predict_proba(ds.X)
        full = np.zeros((ds.n_samples, max(len(ds.classes or []), int(est.classes_.max()) + 1)))
        full[:, est.classes_.astype(int)] = probs
        return metrics_classification(full, est.predict(ds.X), ds.y)
    return metrics_regression(est.predict(ds.X), ds.y)


@dataclass
class RunResult:
    estimator: object
    train: Dataset
    test: Dataset
    metrics: dict
    report: TrainReport

    def rules(self, threshold=0.5):
        return rules_for(self.estimator, self.train, threshold)


def rules_for(est, ds: Dataset, threshold=0.5):
    """First-layer rules labelled with the terciles of ``ds``."""
    Z = est.scaler_.transform(ds.X)
    return extract_rules(est.model_, feature_stats(ds.X, ds.feature_names), Z, threshold,
                         transform=est.scaler_)


def run_experiment(run: RunConfig, ds: Dataset = None, log_path=None) -> RunResult:
    """Split, fit on the training part, score on the held-out part.

    The per-epoch validation metric (RMSE or accuracy) is taken on the
    held-out part as well.
    """
    ds = load_dataset(run) if ds is None else ds
    train_ds, test_ds = split(ds, run.split)
    est = make_estimator(run)
    est.fit(train_ds.X, train_ds.y, eval_set=(test_ds.X, test_ds.y), log_path=log_path)
    return RunResult(est, train_ds, test_ds, evaluate(est, test_ds), est.train_report_)


def model_extra(run: RunConfig, ds: Dataset) -> dict:
    return {"feature_names": list(ds.feature_names), "target": ds.target_name, "task": ds.task,
            "class_names": list(ds.classes) if ds.classes is not None else None}


def write_run(result: RunResult, run: RunConfig, out_dir):
    """Model, epoch log, metrics and effective config into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    result.estimator.save(os.path.join(out_dir, MODEL_FILE), model_extra(run, result.train))
    result.report.write_csv(os.path.join(out_dir, EPOCH_LOG))
    write_metrics(result.metrics, os.path.join(out_dir, METRICS_TXT),
                  os.path.join(out_dir, METRICS_JSON))
    write_effective_config(replace(run, output_dir=os.path.abspath(out_dir)), out_dir)


def write_effective_config(run: RunConfig, out_dir):
    with open(os.path.join(out_dir, EFFECTIVE_CONFIG), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_config(run))


# -- ablation -----------------------------------------------------------------


@dataclass(frozen=True)
class AblationRow:
    lambda_sparse: float
    mean_features_per_rule: float
    val_metric: float


def _point_dir(out_dir, lam):
    return os.path.join(out_dir, f"lambda_s={lam!r}")


def ablation_point(run: RunConfig, lam: float, out_dir=None) -> AblationRow:
    """Train at one sparsity weight; validation metric is RMSE or accuracy."""
    point = run.with_lambda_sparse(lam)
    result = run_experiment(point)
    mean = feature_count_stats(result.rules(run.threshold))["mean"]
    metric = result.metrics["ACC" if run.task == CLASSIFICATION else "RMSE"]
    if out_dir is not None:
        write_run(result, point, _point_dir(out_dir, lam))
    return AblationRow(float(lam), float(mean), float(metric))


def _safe_point(args):
    run, lam, out_dir = args
    try:
        return ablation_point(run, lam, out_dir), None
    except (KanfisError, ValueError, OSError) as exc:
        return None, f"lambda_s={lam!r}: {type(exc).__name__}: {exc}"


def run_ablation(run: RunConfig, grid, out_dir=None, parallel=False, workers=None):
    """One run per grid value with a shared seed.

    Returns ``(rows, failures)``; a failing point is reported, not fatal.
    """
    grid = [float(v) for v in grid]
    if not grid:
        raise ConfigurationError("lambda_s grid is empty")
    if any(v < 0 for v in grid):
        raise ConfigurationError("lambda_s values must be non-negative")
    jobs = [(run, lam, out_dir) for lam in grid]
    if parallel and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_safe_point, jobs))
    else:
        outcomes = [_safe_point(job) for job in jobs]
    rows = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    return rows, failures


def ablation_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda_s", "mean_features_per_rule", "val_metric"])
    for r in rows:
        w.writerow([repr(r.lambda_sparse), repr(r.mean_features_per_rule), repr(r.val_metric)])
    return buf.getvalue()
