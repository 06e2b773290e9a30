"""Fuzzy layers, deep stacking and the linear defuzzification head.

A layer maps ``x`` of shape ``(B, d_in)`` to rule activations ``(B, d_out)``::

    phi[b,i,j,k] = membership_k(x[b,i]; edge (i, j))
    e[b,i,j]     = sum_k amplitude[i,j,k] * phi[b,i,j,k]
    h[b,j]       = sum_i sigmoid(mask_logits[i,j]) * e[b,i,j]

Layers are chained with per-sample standardization between them (not after
the last), and the final activations go through ``W h + b``.

Parameters live in one flat, ordered ``params`` mapping on the model, so the
same forward code runs on plain arrays or on tape-tracked variables.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import softmax

from . import numerics as nx
from .errors import ConfigurationError, SchemaError, ShapeError, TaskKindError
from .membership import (
    FAMILIES,
    basis_activation,
    basis_param_names,
    inverse_softplus,
    raw_for_width,
)

NORM_EPS = 1e-5
ANCHOR_RANGE = (-2.0, 2.0)
MODEL_FORMAT = "kanfis-model"
MODEL_VERSION = 1

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class FuzzyLayer:
    """Shape and family of one fuzzy layer; its arrays live in the model."""

    d_in: int
    d_out: int
    n_bases: int
    family: str = "gaussian"
    it2: bool = False
    index: int = 0

    def __post_init__(self):
        if min(self.d_in, self.d_out, self.n_bases) < 1:
            raise ConfigurationError("layer dimensions and basis count must be >= 1")
        basis_param_names(self.family, self.it2)

    @property
    def prefix(self):
        return f"layer{self.index}."

    @property
    def basis_names(self):
        return basis_param_names(self.family, self.it2)

    def param_shapes(self) -> dict[str, tuple]:
        grid = (self.d_in, self.d_out, self.n_bases)
        shapes = {self.prefix + n: grid for n in self.basis_names}
        shapes[self.prefix + "mask_logits"] = (self.d_in, self.d_out)
        return shapes

    def init_params(self, rng: np.random.Generator, mask_init: float = 0.0) -> dict:
        d_in, d_out, k = self.d_in, self.d_out, self.n_bases
        lo, hi = ANCHOR_RANGE
        spacing = (hi - lo) / (k - 1) if k > 1 else hi - lo
        anchors = np.linspace(lo, hi, k) if k > 1 else np.array([0.5 * (lo + hi)])
        center = anchors + rng.uniform(-0.25, 0.25, size=(d_in, d_out, k)) * spacing
        # half-spacing from a neighbour sits at membership 0.5
        sigma = 0.5 * spacing / math.sqrt(2.0 * math.log(2.0))
        grid = np.ones((d_in, d_out, k))
        out = {"center": center, "amp_raw": grid * inverse_softplus(1.0 / k)}
        if self.it2:
            out["lower_width_raw"] = grid * raw_for_width(0.8 * sigma)
            out["gap_raw"] = grid * raw_for_width(0.4 * sigma)
        elif self.family == "gaussian":
            out["width_raw"] = grid * raw_for_width(sigma)
        elif self.family == "bell":
            out["a_raw"] = grid * raw_for_width(0.5 * spacing)
            out["b_raw"] = grid * raw_for_width(2.0)
        else:
            signs = rng.choice([-1.0, 1.0], size=(d_in, d_out, k))
            out["slope"] = signs * (4.0 / spacing)
        params = {self.prefix + n: out[n] for n in self.basis_names}
        params[self.prefix + "mask_logits"] = mask_init + rng.uniform(-0.1, 0.1, size=(d_in, d_out))
        return params

    def local(self, params: Mapping) -> dict:
        n = len(self.prefix)
        return {key[n:]: v for key, v in params.items() if key.startswith(self.prefix)}


@dataclass
class ForwardTrace:
    activations: list  # pre-normalization h for each layer
    output: object

    @property
    def firings(self):
        return self.activations[0]


class KanfisModel:
    """Stacked fuzzy layers plus the linear head, with a flat parameter registry."""

    def __init__(self, layers: Sequence[FuzzyLayer], n_outputs: int, task: str = REGRESSION,
                 params: Optional[Mapping[str, np.ndarray]] = None):
        if not layers:
            raise ConfigurationError("a model needs at least one fuzzy layer")
        for a, b in zip(layers, layers[1:]):
            if a.d_out != b.d_in:
                raise ShapeError(f"layer {a.index} emits {a.d_out} units but layer {b.index} takes {b.d_in}")
        if task not in (REGRESSION, CLASSIFICATION):
            raise TaskKindError(f"unknown task {task!r}")
        if task == CLASSIFICATION and n_outputs < 2:
            raise ConfigurationError("classification needs at least two classes")
        self.layers = list(layers)
        self.n_outputs = int(n_outputs)
        self.task = task
        self.params: dict[str, np.ndarray] = {}
        if params is not None:
            self.set_params(params)

    @classmethod
    def build(cls, n_features, hidden=(16,), n_bases=3, family="gaussian", it2=False,
              task=REGRESSION, n_outputs=1, seed=0, mask_init=0.0):
        """Construct and initialize a model from a seed."""
        if family not in FAMILIES:
            raise ConfigurationError(f"unknown membership family {family!r}")
        widths = [int(n_features), *[int(w) for w in hidden]]
        layers = [
            FuzzyLayer(widths[i], widths[i + 1], int(n_bases), family, bool(it2), i)
            for i in range(len(widths) - 1)
        ]
        model = cls(layers, n_outputs, task)
        rng = np.random.default_rng(seed)
        params = {}
        for layer in layers:
            params.update(layer.init_params(rng, mask_init))
        h = layers[-1].d_out
        params["head.weight"] = rng.normal(0.0, 1.0 / math.sqrt(h), size=(n_outputs, h))
        params["head.bias"] = np.zeros(n_outputs)
        model.set_params(params)
        return model

    @property
    def n_features(self):
        return self.layers[0].d_in

    @property
    def n_rules(self):
        return self.layers[0].d_out

    @property
    def family(self):
        return self.layers[0].family

    @property
    def it2(self):
        return self.layers[0].it2

    @property
    def n_bases(self):
        return self.layers[0].n_bases

    def param_shapes(self) -> dict[str, tuple]:
        shapes = {}
        for layer in self.layers:
            shapes.update(layer.param_shapes())
        shapes["head.weight"] = (self.n_outputs, self.layers[-1].d_out)
        shapes["head.bias"] = (self.n_outputs,)
        return shapes

    def set_params(self, params: Mapping[str, np.ndarray]):
        shapes = self.param_shapes()
        missing = set(shapes) - set(params)
        extra = set(params) - set(shapes)
        if missing or extra:
            raise SchemaError(f"parameter mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        new = {}
        for name, shape in shapes.items():
            arr = np.array(params[name], dtype=np.float64)
            if arr.shape != tuple(shape):
                raise ShapeError(f"{name}: expected shape {tuple(shape)}, got {arr.shape}")
            new[name] = arr
        self.params = new

    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.params.values()))

    def mask(self, layer_index=0):
        layer = self.layers[layer_index]
        return nx.sigmoid(self.params[layer.prefix + "mask_logits"])

    def forward(self, X, params=None) -> ForwardTrace:
        return model_forward(self, X, params)

    def copy(self):
        return KanfisModel(self.layers, self.n_outputs, self.task,
                           {k: v.copy() for k, v in self.params.items()})

    # -- persistence ---------------------------------------------------------

    def to_dict(self, extra: Optional[Mapping] = None) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "task": self.task,
            "n_outputs": self.n_outputs,
            "family": self.family,
            "it2": self.it2,
            "n_bases": self.n_bases,
            "layer_dims": [[layer.d_in, layer.d_out] for layer in self.layers],
            "params": {
                name: {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}
                for name, arr in self.params.items()
            },
            "extra": dict(extra or {}),
        }

    @classmethod
    def from_dict(cls, doc: Mapping):
        if doc.get("format") != MODEL_FORMAT:
            raise SchemaError("not a kanfis model document")
        if doc.get("version") != MODEL_VERSION:
            raise SchemaError(f"unsupported model version {doc.get('version')!r}")
        layers = [
            FuzzyLayer(d_in, d_out, doc["n_bases"], doc["family"], doc["it2"], i)
            for i, (d_in, d_out) in enumerate(doc["layer_dims"])
        ]
        params = {
            name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in doc["params"].items()
        }
        return cls(layers, doc["n_outputs"], doc["task"], params)


def dumps_model(model: KanfisModel, extra: Optional[Mapping] = None) -> str:
    """Serialize to JSON text. Floats use shortest round-trip repr, so
    load -> dump reproduces the bytes exactly."""
    return json.dumps(model.to_dict(extra), indent=1, sort_keys=True) + "\n"


def loads_model(text: str):
    """Inverse of :func:`dumps_model`; returns ``(model, extra)``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}") from None
    return KanfisModel.from_dict(doc), doc.get("extra", {})


def save_model(model, path, extra=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model, extra))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())


# -- forward pipeline ---------------------------------------------------------


def layer_forward(layer: FuzzyLayer, x, params: Mapping):
    """Rule activations of one layer; ``params`` is the model-level registry."""
    xv = nx.value_of(x)
    if xv.ndim != 2 or xv.shape[1] != layer.d_in:
        raise ShapeError(f"layer {layer.index} expects (B, {layer.d_in}) input, got {xv.shape}")
    p = layer.local(params)
    xe = nx.reshape(x, (xv.shape[0], layer.d_in, 1, 1))
    phi = basis_activation(xe, p, layer.family, layer.it2)
    edge = nx.einsum("bijk,ijk->bij", phi, nx.softplus(p["amp_raw"]))
    return nx.einsum("bij,ij->bj", edge, nx.sigmoid(p["mask_logits"]))


def normalize(h):
    """Standardize each row across units: ``(h - mean) / sqrt(var + 1e-5)``."""
    centered = h - nx.mean(h, axis=1, keepdims=True)
    var = nx.mean(nx.square(centered), axis=1, keepdims=True)
    return centered / nx.sqrt(var + NORM_EPS)


def model_forward(model: KanfisModel, x, params: Optional[Mapping] = None) -> ForwardTrace:
    params = model.params if params is None else params
    if not isinstance(x, nx.Var):
        x = np.asarray(x, dtype=np.float64)
    h = x
    activations = []
    last = len(model.layers) - 1
    for i, layer in enumerate(model.layers):
        h = layer_forward(layer, h, params)
        activations.append(h)
        if i < last:
            h = normalize(h)
    y = nx.matmul(h, nx.transpose(params["head.weight"])) + params["head.bias"]
    return ForwardTrace(activations, y)


def predict_class(model: KanfisModel, x):
    """Class labels and softmax probabilities for a classification model."""
    if model.task != CLASSIFICATION:
        raise TaskKindError("predict_class requires a classification model")
    logits = model_forward(model, x).output
    probs = softmax(logits, axis=1)
    return np.argmax(probs, axis=1), probs
