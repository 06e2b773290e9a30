"""scikit-learn compatible wrappers around :class:`~kanfis.network.KanfisModel`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data
from scipy.special import softmax

from .data import Standardizer
from .errors import SchemaError
from .network import CLASSIFICATION, REGRESSION, KanfisModel, load_model, model_forward, save_model
from .training import TrainConfig, train


class _KANFISBase(TransformerMixin, BaseEstimator):
    def __init__(
        self,
        hidden_layer_sizes=(16,),
        n_bases=3,
        mf="gaussian",
        it2=False,
        lambda_sparse=1e-2,
        lambda_distinct=1e-3,
        learning_rate=1e-2,
        epochs=100,
        batch_size=64,
        sparse_warmup=0.2,
        mask_init=0.0,
        random_state=42,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.n_bases = n_bases
        self.mf = mf
        self.it2 = it2
        self.lambda_sparse = lambda_sparse
        self.lambda_distinct = lambda_distinct
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.sparse_warmup = sparse_warmup
        self.mask_init = mask_init
        self.random_state = random_state

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lambda_sparse=self.lambda_sparse,
            lambda_distinct=self.lambda_distinct,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=int(self.random_state),
            mf_family=self.mf,
            it2=self.it2,
            hidden=tuple(self.hidden_layer_sizes),
            n_bases=self.n_bases,
            sparse_warmup=self.sparse_warmup,
            mask_init=self.mask_init,
        ).validate()

    def _fit(self, X, y_model, n_outputs, task, val_metric=None, log_path=None):
        if X.shape[0] < 2:
            raise ValueError(f"n_samples={X.shape[0]}: at least two samples are needed to fit")
        cfg = self.train_config()
        self.scaler_ = Standardizer(getattr(self, "feature_names_in_", None)).fit(X)
        Z = self.scaler_.transform(X)
        self.model_ = KanfisModel.build(
            X.shape[1], cfg.hidden, cfg.n_bases, cfg.mf_family, cfg.it2, task, n_outputs,
            seed=cfg.seed, mask_init=cfg.mask_init,
        )
        metric = None if val_metric is None else (lambda m: val_metric(self))
        self.train_report_ = train(self.model_, Z, y_model, cfg, metric, log_path)
        return self

    def _logits(self, X):
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return model_forward(self.model_, self.scaler_.transform(X)).output

    def transform(self, X):
        """First-layer rule firing strengths, shape ``(n_samples, n_rules)``."""
        check_is_fitted(self, "model_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return model_forward(self.model_, self.scaler_.transform(X)).firings

    # -- persistence ---------------------------------------------------------

    def state_dict(self) -> dict:
        """Preprocessing and hyperparameters stored next to the model weights."""
        check_is_fitted(self, "model_")
        params = self.get_params()
        params["hidden_layer_sizes"] = list(params["hidden_layer_sizes"])
        state = {
            "estimator": type(self).__name__,
            "params": params,
            "x_mean": self.scaler_.mean_.tolist(),
            "x_scale": self.scaler_.scale_.tolist(),
        }
        state.update(self._target_state())
        return state

    def save(self, path, extra=None):
        """Write weights and preprocessing as one JSON document."""
        state = self.state_dict()
        state.update(extra or {})
        save_model(self.model_, path, state)

    @staticmethod
    def load(path):
        """Rebuild a fitted estimator from :meth:`save` output.

        Returns ``(estimator, extra)`` where ``extra`` is the full stored state.
        """
        model, extra = load_model(path)
        kinds = {"KANFISRegressor": KANFISRegressor, "KANFISClassifier": KANFISClassifier}
        try:
            cls = kinds[extra["estimator"]]
            params = dict(extra["params"])
            params["hidden_layer_sizes"] = tuple(params["hidden_layer_sizes"])
            est = cls(**params)
            est.scaler_ = Standardizer.from_arrays(extra["x_mean"], extra["x_scale"])
            est._restore_target(extra)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"{path}: missing estimator state ({exc})") from None
        if est.scaler_.n_features_in_ != model.n_features:
            raise SchemaError(f"{path}: preprocessing covers {est.scaler_.n_features_in_} features, "
                              f"model takes {model.n_features}")
        est.model_ = model
        est.n_features_in_ = model.n_features
        return est, extra


class KANFISRegressor(RegressorMixin, _KANFISBase):
    """Additive neuro-fuzzy regressor.

    Inputs and targets are standardized internally; predictions are returned
    in the original target units.
    """

    def fit(self, X, y, eval_set=None, log_path=None):
        X, y = validate_data(self, X, y, dtype=np.float64, multi_output=True, y_numeric=True)
        y2 = y.reshape(len(y), -1)
        self.single_output_ = y.ndim == 1
        self.y_mean_ = y2.mean(axis=0)
        self.y_scale_ = y2.std(axis=0)
        self.y_scale_[self.y_scale_ == 0] = 1.0
        metric = None
        if eval_set is not None:
            Xv, yv = eval_set
            yv = np.asarray(yv, dtype=np.float64)

            def metric(est):
                pred = est.predict(Xv)
                return float(np.sqrt(np.mean((pred - yv) ** 2)))

        return self._fit(X, (y2 - self.y_mean_) / self.y_scale_, y2.shape[1], REGRESSION, metric, log_path)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.multi_output = True
        return tags

    def predict(self, X):
        out = self._logits(X) * self.y_scale_ + self.y_mean_
        return out.ravel() if self.single_output_ else out

    def _target_state(self):
        return {"y_mean": self.y_mean_.tolist(), "y_scale": self.y_scale_.tolist(),
                "single_output": self.single_output_}

    def _restore_target(self, state):
        self.y_mean_ = np.asarray(state["y_mean"], dtype=np.float64)
        self.y_scale_ = np.asarray(state["y_scale"], dtype=np.float64)
        self.single_output_ = bool(state["single_output"])


class KANFISClassifier(ClassifierMixin, _KANFISBase):
    """Additive neuro-fuzzy classifier with a softmax readout."""

    def __init__(self, hidden_layer_sizes=(12,), n_bases=3, mf="gaussian", it2=False,
                 lambda_sparse=1e-2, lambda_distinct=1e-3, learning_rate=1e-2, epochs=100,
                 batch_size=64, sparse_warmup=0.2, mask_init=0.0, random_state=42):
        super().__init__(hidden_layer_sizes, n_bases, mf, it2, lambda_sparse, lambda_distinct,
                         learning_rate, epochs, batch_size, sparse_warmup, mask_init, random_state)

    def fit(self, X, y, eval_set=None, log_path=None):
        X, y = validate_data(self, X, y, dtype=np.float64)
        if X.shape[0] < 2:
            raise ValueError(f"n_samples={X.shape[0]}: at least two samples are needed to fit")
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("classification needs at least two classes")
        metric = None
        if eval_set is not None:
            Xv, yv = eval_set
            yv = np.asarray(yv)

            def metric(est):
                return float(np.mean(est.predict(Xv) == yv))

        return self._fit(X, encoded, self.classes_.size, CLASSIFICATION, metric, log_path)

    def predict_proba(self, X):
        return softmax(self._logits(X), axis=1)

    def predict(self, X):
        logits = self._logits(X)
        return self.classes_[np.argmax(logits, axis=1)]

    def _target_state(self):
        return {"classes": self.classes_.tolist()}

    def _restore_target(self, state):
        self.classes_ = np.asarray(state["classes"])
