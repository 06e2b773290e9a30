"""Additive neuro-fuzzy inference with learnable membership bases.

The main entry points are :class:`KANFISRegressor` and
:class:`KANFISClassifier`; lower-level pieces live in the submodules.
"""

from .baseline import ProductFuzzySystem, complexity_table, count_parameters, pfs_forward
from .data import Dataset, SplitSpec, Standardizer, load_csv, metrics_classification, metrics_regression
from .errors import KanfisError
from .estimator import KANFISClassifier, KANFISRegressor
from .interpret import extract_rules, feature_count_stats, render_report
from .network import KanfisModel, load_model, model_forward, save_model
from .training import TrainConfig, TrainReport, total_loss, train

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "KANFISClassifier",
    "KANFISRegressor",
    "KanfisError",
    "KanfisModel",
    "ProductFuzzySystem",
    "SplitSpec",
    "Standardizer",
    "TrainConfig",
    "TrainReport",
    "complexity_table",
    "count_parameters",
    "extract_rules",
    "feature_count_stats",
    "load_csv",
    "load_model",
    "metrics_classification",
    "metrics_regression",
    "model_forward",
    "pfs_forward",
    "render_report",
    "save_model",
    "total_loss",
    "train",
]
