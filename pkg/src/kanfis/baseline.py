"""Grid-partition product-rule fuzzy system and exact complexity counts.

The product system fires rule ``j`` with ``tau_j = prod_i mu_{i, j_i}(x_i)``
over every combination of one membership function per input, so ``M``
functions per input give ``M**N`` rules. Its output is the firing-weighted
mean of constant consequents. The additive model's count is linear in ``N``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import CapacityError, ConfigurationError
from .membership import BASIS_PARAMS

MAX_INPUTS = 12
MAX_RULES = 10**6
DENOM_FLOOR = 1e-30


@dataclass
class ProductFuzzySystem:
    """Zeroth-order TSK system over a full grid partition.

    ``centers`` and ``sigmas`` have shape ``(N, M)``; ``consequents`` has one
    entry per rule, rules ordered as ``itertools.product(range(M), repeat=N)``.
    """

    centers: np.ndarray
    sigmas: np.ndarray
    consequents: np.ndarray

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64)
        self.sigmas = np.asarray(self.sigmas, dtype=np.float64)
        self.consequents = np.asarray(self.consequents, dtype=np.float64)
        n, m = self.centers.shape
        _check_capacity(n, m)
        if self.sigmas.shape != (n, m) or np.any(self.sigmas <= 0):
            raise ConfigurationError("sigmas must be positive with the same shape as centers")
        if self.consequents.shape != (m**n,):
            raise ConfigurationError(f"expected {m**n} consequents, got {self.consequents.shape}")

    @classmethod
    def grid(cls, n_inputs, n_mfs, low=-2.0, high=2.0, consequents=None):
        """Evenly spaced centers with neighbours crossing at membership 0.5."""
        _check_capacity(n_inputs, n_mfs)
        if n_mfs > 1:
            anchors = np.linspace(low, high, n_mfs)
            spacing = (high - low) / (n_mfs - 1)
        else:
            anchors = np.array([0.5 * (low + high)])
            spacing = high - low
        sigma = 0.5 * spacing / math.sqrt(2.0 * math.log(2.0))
        centers = np.tile(anchors, (n_inputs, 1))
        if consequents is None:
            consequents = np.zeros(n_mfs**n_inputs)
        return cls(centers, np.full_like(centers, sigma), consequents)

    @property
    def n_inputs(self):
        return self.centers.shape[0]

    @property
    def n_mfs(self):
        return self.centers.shape[1]

    @property
    def n_rules(self):
        return self.n_mfs**self.n_inputs

    def firing_strengths(self, X):
        """Unnormalized ``tau`` of shape ``(B, M**N)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        mu = np.exp(-((X[:, :, None] - self.centers) ** 2) / (2.0 * self.sigmas**2))
        tau = np.ones((X.shape[0], 1))
        for i in range(self.n_inputs):
            # later inputs vary fastest, matching itertools.product order
            tau = (tau[:, :, None] * mu[:, i, None, :]).reshape(X.shape[0], -1)
        return tau

    def normalized_firing(self, X):
        tau = self.firing_strengths(X)
        return tau / np.maximum(tau.sum(axis=1, keepdims=True), DENOM_FLOOR)

    def fit_consequents(self, X, y):
        """Least-squares consequents for fixed antecedents."""
        phi = self.normalized_firing(X)
        self.consequents = np.linalg.lstsq(phi, np.asarray(y, dtype=np.float64).ravel(), rcond=None)[0]
        return self


def _check_capacity(n, m):
    if n < 1 or m < 1:
        raise ConfigurationError("inputs and membership functions per input must be >= 1")
    if n > MAX_INPUTS or m**n > MAX_RULES:
        raise CapacityError(f"grid of {m}^{n} = {m**n} rules exceeds the limit "
                            f"(N <= {MAX_INPUTS}, M^N <= {MAX_RULES})")


def pfs_forward(sys: ProductFuzzySystem, X):
    """``sum_j tau_j c_j / sum_j tau_j`` per row of ``X``."""
    tau = sys.firing_strengths(X)
    return tau @ sys.consequents / np.maximum(tau.sum(axis=1), DENOM_FLOOR)


# -- complexity ---------------------------------------------------------------


def basis_param_count(family="gaussian", it2=False) -> int:
    return len(BASIS_PARAMS["it2" if it2 else family])


def pfs_counts(n_inputs: int, n_mfs: int) -> tuple:
    """``(rules, params)``: ``M**N`` rules, ``M**N`` consequents plus ``2 M N`` MF params."""
    if n_inputs < 1 or n_mfs < 1:
        raise ConfigurationError("dimensions must be positive")
    rules = n_mfs**n_inputs
    return rules, rules + 2 * n_mfs * n_inputs


def afs_param_count(n_inputs, hidden=(16,), n_bases=3, n_outputs=1, family="gaussian",
                    it2=False) -> int:
    """Trainable scalars of an additive model: per edge ``K * P + 1`` (mask), plus head."""
    if n_inputs < 1 or n_bases < 1 or n_outputs < 1 or not hidden or min(hidden) < 1:
        raise ConfigurationError("dimensions must be positive")
    p = basis_param_count(family, it2)
    widths = [n_inputs, *hidden]
    edges = sum(a * b * (n_bases * p + 1) for a, b in zip(widths, widths[1:]))
    return edges + n_outputs * widths[-1] + n_outputs


def count_parameters(kind, **dims) -> dict:
    kind = kind.lower()
    if kind == "pfs":
        rules, params = pfs_counts(dims["n_inputs"], dims["n_mfs"])
        return {"rules": rules, "params": params}
    if kind == "afs":
        return {"params": afs_param_count(**dims)}
    raise ConfigurationError(f"unknown system kind {kind!r}")


@dataclass(frozen=True)
class ComplexityRow:
    n: int
    pfs_rules: int
    pfs_params: int
    afs_params: int

    @property
    def ratio(self):
        return self.pfs_params / self.afs_params


def complexity_table(n_values: Iterable[int], m=3, h=16, k=3, family="gaussian", it2=False):
    rows = []
    for n in n_values:
        rules, params = pfs_counts(n, m)
        rows.append(ComplexityRow(n, rules, params, afs_param_count(n, (h,), k, 1, family, it2)))
    return rows


def complexity_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N", "pfs_rules", "pfs_params", "afs_params"])
    for r in rows:
        w.writerow([r.n, r.pfs_rules, r.pfs_params, r.afs_params])
    return buf.getvalue()
