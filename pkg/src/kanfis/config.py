"""INI run configuration: data source, split, architecture, training and output.

Example::

    [data]
    path = ccpp.csv
    target = PE
    task = regression

    [model]
    hidden = 16
    n_bases = 3
    mf = gaussian

    [train]
    epochs = 200

    [output]
    dir = runs/ccpp

Relative paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from typing import Optional

from .data import CLASSIFICATION, REGRESSION, SplitSpec
from .errors import ConfigurationError, SchemaError
from .training import TrainConfig

_SECTIONS = {
    "data": {"path", "target", "task", "train_fraction", "split_seed", "stratify", "synthetic",
             "n_samples", "n_features", "n_informative", "noise", "data_seed"},
    "model": {"hidden", "n_bases", "mf", "it2", "mask_init"},
    "train": {"lambda_sparse", "lambda_distinct", "learning_rate", "epochs", "batch_size", "seed",
              "sparse_warmup"},
    "output": {"dir", "threshold"},
}


@dataclass(frozen=True)
class SyntheticSpec:
    """Sparse regression data: only the first ``n_informative`` features matter."""

    n_samples: int = 1000
    n_features: int = 20
    n_informative: int = 3
    noise: float = 0.1
    seed: int = 0


@dataclass
class RunConfig:
    data_path: Optional[str] = None
    target: str = "y"
    task: str = REGRESSION
    synthetic: Optional[SyntheticSpec] = None
    split: SplitSpec = field(default_factory=SplitSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "runs/default"
    threshold: float = 0.5

    def validate(self):
        if self.task not in (REGRESSION, CLASSIFICATION):
            raise ConfigurationError(f"unknown task {self.task!r}")
        if (self.data_path is None) == (self.synthetic is None):
            raise ConfigurationError("[data] needs exactly one of 'path' or 'synthetic'")
        if self.synthetic is not None and self.task != REGRESSION:
            raise ConfigurationError("synthetic data is a regression task")
        if not 0 < self.threshold < 1:
            raise ConfigurationError("threshold must lie in (0, 1)")
        self.train.validate()
        return self

    def with_lambda_sparse(self, value, output_dir=None):
        return replace(self, train=replace(self.train, lambda_sparse=float(value)),
                       output_dir=output_dir or self.output_dir)


def _bool(section, key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"[{section}] {key}: not a boolean: {raw!r}")


def _num(section, key, raw, kind):
    try:
        return kind(raw)
    except ValueError:
        raise ConfigurationError(f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}") from None


def _widths(raw):
    try:
        widths = tuple(int(p) for p in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigurationError(f"[model] hidden: expected integers, got {raw!r}") from None
    if not widths:
        raise ConfigurationError("[model] hidden: at least one layer width is required")
    return widths


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config parse error: {exc}".splitlines()[0]) from None
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigurationError(f"unknown config section [{section}]")
        unknown = set(cp[section]) - _SECTIONS[section]
        if unknown:
            raise ConfigurationError(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")

    def get(section, key, default=None):
        return cp.get(section, key, fallback=default) if cp.has_section(section) else default

    def resolve(p):
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

    run = RunConfig()
    path = get("data", "path")
    synthetic = get("data", "synthetic")
    if path is not None:
        run.data_path = resolve(path)
    if synthetic is not None:
        if synthetic.strip() != "sparse":
            raise ConfigurationError(f"[data] synthetic: unknown generator {synthetic!r}")
        d = SyntheticSpec()
        run.synthetic = SyntheticSpec(
            _num("data", "n_samples", get("data", "n_samples", d.n_samples), int),
            _num("data", "n_features", get("data", "n_features", d.n_features), int),
            _num("data", "n_informative", get("data", "n_informative", d.n_informative), int),
            _num("data", "noise", get("data", "noise", d.noise), float),
            _num("data", "data_seed", get("data", "data_seed", d.seed), int),
        )
    run.target = get("data", "target", run.target)
    run.task = get("data", "task", run.task).strip()
    try:
        run.split = SplitSpec(
            _num("data", "train_fraction", get("data", "train_fraction", 0.8), float),
            _num("data", "split_seed", get("data", "split_seed", 42), int),
            _bool("data", "stratify", get("data", "stratify", "true")),
        )
    except SchemaError as exc:
        raise ConfigurationError(str(exc)) from None

    t = TrainConfig()
    run.train = TrainConfig(
        lambda_sparse=_num("train", "lambda_sparse", get("train", "lambda_sparse", t.lambda_sparse), float),
        lambda_distinct=_num("train", "lambda_distinct", get("train", "lambda_distinct", t.lambda_distinct), float),
        learning_rate=_num("train", "learning_rate", get("train", "learning_rate", t.learning_rate), float),
        epochs=_num("train", "epochs", get("train", "epochs", t.epochs), int),
        batch_size=_num("train", "batch_size", get("train", "batch_size", t.batch_size), int),
        seed=_num("train", "seed", get("train", "seed", t.seed), int),
        mf_family=get("model", "mf", t.mf_family).strip(),
        it2=_bool("model", "it2", get("model", "it2", str(t.it2))),
        hidden=_widths(get("model", "hidden", "16")),
        n_bases=_num("model", "n_bases", get("model", "n_bases", t.n_bases), int),
        sparse_warmup=_num("train", "sparse_warmup", get("train", "sparse_warmup", t.sparse_warmup), float),
        mask_init=_num("model", "mask_init", get("model", "mask_init", t.mask_init), float),
    )
    if run.train.seed < 0:
        raise ConfigurationError("[train] seed must be non-negative")
    run.output_dir = resolve(get("output", "dir", run.output_dir))
    run.threshold = _num("output", "threshold", get("output", "threshold", run.threshold), float)
    return run.validate()


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def dump_config(run: RunConfig) -> str:
    """Effective config with every default resolved; parses back to ``run``."""
    cp = configparser.ConfigParser(interpolation=None)
    data = {"target": run.target, "task": run.task,
            "train_fraction": repr(run.split.train_fraction),
            "split_seed": str(run.split.seed), "stratify": str(run.split.stratify).lower()}
    if run.data_path is not None:
        data["path"] = run.data_path
    if run.synthetic is not None:
        s = run.synthetic
        data.update(synthetic="sparse", n_samples=str(s.n_samples), n_features=str(s.n_features),
                    n_informative=str(s.n_informative), noise=repr(s.noise), data_seed=str(s.seed))
    t = run.train
    cp["data"] = dict(sorted(data.items()))
    cp["model"] = {"hidden": ", ".join(str(h) for h in t.hidden), "n_bases": str(t.n_bases),
                   "mf": t.mf_family, "it2": str(t.it2).lower(), "mask_init": repr(t.mask_init)}
    cp["train"] = {"lambda_sparse": repr(t.lambda_sparse), "lambda_distinct": repr(t.lambda_distinct),
                   "learning_rate": repr(t.learning_rate), "epochs": str(t.epochs),
                   "batch_size": str(t.batch_size), "seed": str(t.seed),
                   "sparse_warmup": repr(t.sparse_warmup)}
    cp["output"] = {"dir": run.output_dir, "threshold": repr(run.threshold)}
    lines = []
    for section in cp.sections():
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in cp[section].items()]
        lines.append("")
    return "\n".join(lines)


def config_fields():
    return {s: sorted(keys) for s, keys in _SECTIONS.items()}


__all__ = ["RunConfig", "SyntheticSpec", "parse_config", "load_config", "dump_config",
           "config_fields"]
