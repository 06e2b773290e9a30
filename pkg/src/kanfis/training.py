"""Losses, rule regularizers, Adam and the deterministic mini-batch loop."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from . import numerics as nx
from .errors import ConfigurationError, DivergenceError, LabelError, ShapeError
from .membership import FAMILIES
from .network import CLASSIFICATION, REGRESSION, KanfisModel, model_forward

DIVERGENCE_LIMIT = 1e8
COSINE_FLOOR = 1e-12


@dataclass
class TrainConfig:
    lambda_sparse: float = 1e-2
    lambda_distinct: float = 1e-3
    learning_rate: float = 1e-2
    epochs: int = 100
    batch_size: int = 64
    seed: int = 42
    mf_family: str = "gaussian"
    it2: bool = False
    hidden: tuple = (16,)
    n_bases: int = 3
    sparse_warmup: float = 0.2  # fraction of epochs over which lambda_sparse ramps up
    mask_init: float = 0.0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)

    def validate(self):
        if self.lambda_sparse < 0 or self.lambda_distinct < 0:
            raise ConfigurationError("regularization weights must be non-negative")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.lambda_distinct > 0 and self.batch_size < 2:
            raise ConfigurationError("batch_size must be >= 2 when lambda_distinct > 0")
        if self.lambda_distinct > 0 and self.hidden and self.hidden[0] < 2:
            raise ConfigurationError("distinctiveness needs at least two rules")
        if self.mf_family not in FAMILIES:
            raise ConfigurationError(f"unknown membership family {self.mf_family!r}")
        if self.it2 and self.mf_family != "gaussian":
            raise ConfigurationError("interval type-2 requires the gaussian family")
        if not self.hidden or min(self.hidden) < 1 or self.n_bases < 1:
            raise ConfigurationError("hidden widths and n_bases must be >= 1")
        if not 0 <= self.sparse_warmup <= 1:
            raise ConfigurationError("sparse_warmup must lie in [0, 1]")
        return self

    def lambda_sparse_at(self, epoch: int) -> float:
        """Linearly ramped sparsity weight for a 0-based epoch."""
        ramp = int(round(self.sparse_warmup * self.epochs))
        if ramp <= 0:
            return self.lambda_sparse
        return self.lambda_sparse * min(1.0, epoch / ramp)


@dataclass
class TrainReport:
    task_loss: list = field(default_factory=list)
    sparse: list = field(default_factory=list)
    distinct: list = field(default_factory=list)
    total: list = field(default_factory=list)
    lambda_sparse: list = field(default_factory=list)
    lambda_distinct: float = 0.0
    val_metric: list = field(default_factory=list)
    final_metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def rows(self):
        for i in range(len(self.total)):
            val = self.val_metric[i] if i < len(self.val_metric) else float("nan")
            yield {
                "epoch": i + 1,
                "task_loss": self.task_loss[i],
                "sparse": self.sparse[i],
                "distinct": self.distinct[i],
                "total": self.total[i],
                "val_metric": val,
            }

    def write_csv(self, path):
        cols = ["epoch", "task_loss", "sparse", "distinct", "total", "val_metric"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: (v if k == "epoch" else repr(float(v))) for k, v in row.items()})


# -- losses -------------------------------------------------------------------


def task_loss(y_hat, y, task: str):
    """MSE for regression, mean softmax cross-entropy for classification."""
    yh = nx.value_of(y_hat)
    if task == REGRESSION:
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if y.shape != yh.shape:
            raise ShapeError(f"prediction shape {yh.shape} does not match target shape {y.shape}")
        return nx.mean(nx.square(y_hat - y))
    if task == CLASSIFICATION:
        labels = np.asarray(y)
        if labels.ndim != 1 or labels.shape[0] != yh.shape[0]:
            raise ShapeError(f"expected {yh.shape[0]} class labels, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= yh.shape[1]
                            or not np.all(labels == np.round(labels))):
            raise LabelError(f"class labels must be integers in [0, {yh.shape[1] - 1}]")
        onehot = np.zeros(yh.shape)
        onehot[np.arange(labels.size), labels.astype(int)] = 1.0
        return -nx.sum(nx.log_softmax(y_hat, axis=1) * onehot) * (1.0 / labels.size)
    raise ConfigurationError(f"unknown task {task!r}")


def binary_entropy(p):
    return -p * np.log(p) - (1.0 - p) * np.log1p(-p)


def sparsity_penalty(mask):
    """Mean binary entropy of mask entries in (0, 1); lies in [0, ln 2]."""
    return nx.mean(-(mask * nx.log(mask)) - (1.0 - mask) * nx.log(1.0 - mask))


def mask_entropy(logits):
    """:func:`sparsity_penalty` of ``sigmoid(logits)``, computed from the logits.

    Stable at saturated masks; d/dz of the entropy is ``-z p (1 - p)``.
    """
    z = nx.value_of(logits)
    p = expit(z)
    # -p ln p - (1-p) ln(1-p) == p softplus(-z) + (1-p) softplus(z)
    ent = p * np.logaddexp(0.0, -z) + (1.0 - p) * np.logaddexp(0.0, z)
    slope = -z * p * (1.0 - p)
    return nx.mean(nx.primitive(ent, (logits,), (lambda g: g * slope,)))


def distinctiveness_penalty(firings):
    """Sum of cosine similarities over all distinct pairs of rule firing columns."""
    fv = nx.value_of(firings)
    if fv.ndim != 2:
        raise ShapeError(f"firings must be (B, rules), got {fv.shape}")
    k = fv.shape[1]
    if k < 2:
        raise ConfigurationError("distinctiveness needs at least two rules")
    gram = nx.einsum("bj,bk->jk", firings, firings)
    norms = nx.sqrt(nx.sum(nx.square(firings), axis=0))
    denom = nx.clip_min(nx.einsum("j,k->jk", norms, norms), COSINE_FLOOR)
    upper = np.triu(np.ones((k, k)), 1)
    return nx.sum((gram / denom) * upper)


def mean_pairwise_cosine(firings) -> float:
    k = np.shape(firings)[1]
    return float(distinctiveness_penalty(np.asarray(firings))) / (k * (k - 1) / 2)


def total_loss(model: KanfisModel, X, y, cfg: TrainConfig, params=None, lambda_sparse=None):
    """Regularized objective and its parts ``{task, sparse, distinct}``.

    ``sparse`` averages the per-layer mask entropies; ``distinct`` is taken
    on the first layer's firings. ``lambda_sparse`` overrides ``cfg`` (warm-up).
    """
    params = model.params if params is None else params
    lam_s = cfg.lambda_sparse if lambda_sparse is None else lambda_sparse
    trace = model_forward(model, X, params)
    task = task_loss(trace.output, y, model.task)
    sparse = _mean_list([mask_entropy(params[layer.prefix + "mask_logits"])
                         for layer in model.layers])
    if cfg.lambda_distinct > 0 and model.n_rules >= 2:
        distinct = distinctiveness_penalty(trace.firings)
    else:
        distinct = 0.0
    total = task + lam_s * sparse + cfg.lambda_distinct * distinct
    return total, {"task": task, "sparse": sparse, "distinct": distinct}


def _mean_list(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc * (1.0 / len(terms))


# -- optimizer ----------------------------------------------------------------


class Adam:
    def __init__(self, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params: dict, grads: dict):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# -- loop ---------------------------------------------------------------------


def train(
    model: KanfisModel,
    X,
    y,
    cfg: TrainConfig,
    val_metric: Optional[Callable[[KanfisModel], float]] = None,
    log_path=None,
) -> TrainReport:
    """Fit ``model`` in place with Adam on shuffled mini-batches.

    The shuffle stream is derived from ``cfg.seed`` only, so two calls with
    identical inputs produce bit-identical parameters.
    """
    cfg.validate()
    if cfg.lambda_distinct > 0 and model.n_rules < 2:
        raise ConfigurationError("distinctiveness needs at least two rules")
    X = nx.as_matrix(X, "X")
    y = np.asarray(y)
    n = X.shape[0]
    if n == 0:
        raise ConfigurationError("training set is empty")
    if y.shape[0] != n:
        raise ShapeError(f"X has {n} rows but y has {y.shape[0]}")

    rng = np.random.default_rng([cfg.seed, 1])
    opt = Adam(cfg.learning_rate)
    names = list(model.params)
    report = TrainReport(lambda_distinct=cfg.lambda_distinct)
    start = time.perf_counter()

    for epoch in range(cfg.epochs):
        lam_s = cfg.lambda_sparse_at(epoch)
        order = rng.permutation(n)
        sums = np.zeros(4)
        batches = 0
        for b, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            tape = nx.GradTape()
            watched = {k: tape.watch(model.params[k], name=k) for k in names}
            total, parts = total_loss(model, X[idx], y[idx], cfg, watched, lam_s)
            value = float(nx.value_of(total))
            if not math.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
                raise DivergenceError(epoch + 1, b + 1, value)
            grads = tape.gradient(total, watched.values())
            opt.step(model.params, dict(zip(names, grads)))
            sums += [
                float(nx.value_of(parts["task"])),
                float(nx.value_of(parts["sparse"])),
                float(nx.value_of(parts["distinct"])),
                value,
            ]
            batches += 1
        means = sums / batches
        report.task_loss.append(float(means[0]))
        report.sparse.append(float(means[1]))
        report.distinct.append(float(means[2]))
        report.total.append(float(means[3]))
        report.lambda_sparse.append(lam_s)
        if val_metric is not None:
            report.val_metric.append(float(val_metric(model)))

    report.seconds = time.perf_counter() - start
    if log_path is not None:
        report.write_csv(log_path)
    return report


def config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["hidden"] = list(cfg.hidden)
    return d
