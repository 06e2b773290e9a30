"""Learnable membership functions and fuzzy edges.

Widths, Bell exponents and amplitudes are stored unconstrained and mapped
through softplus, so positivity (and the strict upper/lower width ordering of
interval type-2 sets) holds by construction at every optimizer step.

All membership functions broadcast over numpy arrays. The ``*_op`` variants
additionally record analytic adjoints on a :class:`~kanfis.numerics.GradTape`
when any argument is a tracked :class:`~kanfis.numerics.Var`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import expit

from . import numerics as nx
from .errors import InvariantViolation, ParameterDomainError

WIDTH_FLOOR = 1e-4

FAMILIES = ("gaussian", "bell", "sigmoid")

# raw parameters per basis, in registry order (amplitude last)
BASIS_PARAMS = {
    "gaussian": ("center", "width_raw", "amp_raw"),
    "it2": ("center", "lower_width_raw", "gap_raw", "amp_raw"),
    "bell": ("center", "a_raw", "b_raw", "amp_raw"),
    "sigmoid": ("center", "slope", "amp_raw"),
}


def softplus(x):
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    """Raw value whose softplus is ``y`` (``y > 0``)."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise ParameterDomainError("softplus image must be positive")
    return y + np.log(-np.expm1(-y))


def positive(raw):
    """Effective width from its raw parameter: ``softplus(raw) + 1e-4``."""
    return softplus(raw) + WIDTH_FLOOR


def raw_for_width(width):
    return inverse_softplus(np.asarray(width, dtype=np.float64) - WIDTH_FLOOR)


def basis_param_names(family: str, it2: bool = False) -> tuple[str, ...]:
    if it2:
        if family != "gaussian":
            raise ParameterDomainError("interval type-2 is only defined for the gaussian family")
        return BASIS_PARAMS["it2"]
    if family not in FAMILIES:
        raise ParameterDomainError(f"unknown membership family {family!r}")
    return BASIS_PARAMS[family]


# -- elementary membership functions -----------------------------------------


def t1_gaussian(x, mu, sigma):
    """``exp(-(x - mu)^2 / (2 sigma^2))``."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ParameterDomainError("gaussian width must be positive")
    d = np.asarray(x, dtype=np.float64) - mu
    return np.exp(-(d * d) / (2.0 * sigma * sigma))


def gaussian_partials(x, mu, sigma):
    """Value and partial derivatives ``(v, dv/dx, dv/dmu, dv/dsigma)``."""
    v = t1_gaussian(x, mu, sigma)
    d = np.asarray(x, dtype=np.float64) - mu
    s2 = sigma * sigma
    dx = -v * d / s2
    return v, dx, -dx, v * d * d / (s2 * sigma)


def bell(x, a, b, c):
    """Generalized bell ``1 / (1 + |(x - c)/a|^(2b))``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ParameterDomainError("bell width a and exponent b must be positive")
    z = np.abs((np.asarray(x, dtype=np.float64) - c) / a)
    return 1.0 / (1.0 + z ** (2.0 * b))


def bell_partials(x, a, b, c):
    """Value and partials ``(v, dv/dx, dv/da, dv/db, dv/dc)``.

    At ``x == c`` the power term and all its partials are taken as zero.
    """
    v = bell(x, a, b, c)
    z = (np.asarray(x, dtype=np.float64) - c) / a
    az = np.abs(z)
    nz = az > 0
    safe = np.where(nz, az, 1.0)
    t = np.where(nz, safe ** (2.0 * b), 0.0)
    dv_dt = -v * v
    dt_dz = np.where(nz, 2.0 * b * t / (safe * np.where(z < 0, -1.0, 1.0)), 0.0)
    dt_db = np.where(nz, 2.0 * t * np.log(safe), 0.0)
    dv_dz = dv_dt * dt_dz
    return v, dv_dz / a, -dv_dz * z / a, dv_dt * dt_db, -dv_dz / a


def sigmoid_mf(x, slope, center):
    """``1 / (1 + exp(-slope (x - center)))``; monotone with the sign of ``slope``."""
    return expit(slope * (np.asarray(x, dtype=np.float64) - center))


def sigmoid_partials(x, slope, center):
    """Value and partials ``(v, dv/dx, dv/dslope, dv/dcenter)``."""
    d = np.asarray(x, dtype=np.float64) - center
    v = expit(slope * d)
    dv = v * (1.0 - v)
    return v, dv * slope, dv * d, -dv * slope


def type_reduce(umf, lmf):
    """Center-of-sets reduction of an interval membership: ``(UMF + LMF) / 2``."""
    umf = np.asarray(umf, dtype=np.float64)
    lmf = np.asarray(lmf, dtype=np.float64)
    if np.any(lmf > umf):
        raise InvariantViolation("lower membership exceeds upper membership")
    return 0.5 * (umf + lmf)


# -- tape-aware versions ------------------------------------------------------


def gaussian_op(x, mu, sigma):
    v, dx, dmu, dsigma = gaussian_partials(nx.value_of(x), nx.value_of(mu), nx.value_of(sigma))
    return nx.primitive(
        v, (x, mu, sigma), (lambda g: g * dx, lambda g: g * dmu, lambda g: g * dsigma)
    )


def bell_op(x, a, b, c):
    v, dx, da, db, dc = bell_partials(
        nx.value_of(x), nx.value_of(a), nx.value_of(b), nx.value_of(c)
    )
    return nx.primitive(
        v,
        (x, a, b, c),
        (lambda g: g * dx, lambda g: g * da, lambda g: g * db, lambda g: g * dc),
    )


def sigmoid_op(x, slope, center):
    v, dx, ds, dc = sigmoid_partials(nx.value_of(x), nx.value_of(slope), nx.value_of(center))
    return nx.primitive(
        v, (x, slope, center), (lambda g: g * dx, lambda g: g * ds, lambda g: g * dc)
    )


def basis_activation(x, params, family: str, it2: bool = False):
    """Per-basis activations ``phi`` for raw ``params`` (arrays or Vars).

    ``x`` must already be shaped to broadcast against the parameter arrays.
    IT2 bases return the type-reduced value.
    """
    center = params["center"]
    if it2:
        lower = nx.softplus(params["lower_width_raw"]) + WIDTH_FLOOR
        upper = lower + nx.softplus(params["gap_raw"]) + WIDTH_FLOOR
        return (gaussian_op(x, center, upper) + gaussian_op(x, center, lower)) * 0.5
    if family == "gaussian":
        return gaussian_op(x, center, nx.softplus(params["width_raw"]) + WIDTH_FLOOR)
    if family == "bell":
        a = nx.softplus(params["a_raw"]) + WIDTH_FLOOR
        b = nx.softplus(params["b_raw"]) + WIDTH_FLOOR
        return bell_op(x, a, b, center)
    if family == "sigmoid":
        return sigmoid_op(x, params["slope"], center)
    raise ParameterDomainError(f"unknown membership family {family!r}")


# -- single-basis value types -------------------------------------------------


@dataclass(frozen=True)
class GaussianBasis:
    center: float
    width_raw: float
    amp_raw: float = 0.0

    family = "gaussian"

    @classmethod
    def from_width(cls, center, sigma, amplitude=1.0):
        return cls(float(center), float(raw_for_width(sigma)), float(inverse_softplus(amplitude)))

    @property
    def sigma(self):
        return float(positive(self.width_raw))

    @property
    def amplitude(self):
        return float(softplus(self.amp_raw))

    def membership(self, x):
        return t1_gaussian(x, self.center, self.sigma)


@dataclass(frozen=True)
class BellBasis:
    center: float
    a_raw: float
    b_raw: float
    amp_raw: float = 0.0

    family = "bell"

    @classmethod
    def from_shape(cls, center, a, b, amplitude=1.0):
        return cls(
            float(center),
            float(raw_for_width(a)),
            float(raw_for_width(b)),
            float(inverse_softplus(amplitude)),
        )

    @property
    def a(self):
        return float(positive(self.a_raw))

    @property
    def b(self):
        return float(positive(self.b_raw))

    @property
    def amplitude(self):
        return float(softplus(self.amp_raw))

    def membership(self, x):
        return bell(x, self.a, self.b, self.center)


@dataclass(frozen=True)
class SigmoidBasis:
    center: float
    slope: float
    amp_raw: float = 0.0

    family = "sigmoid"

    @classmethod
    def from_shape(cls, center, slope, amplitude=1.0):
        return cls(float(center), float(slope), float(inverse_softplus(amplitude)))

    @property
    def amplitude(self):
        return float(softplus(self.amp_raw))

    def membership(self, x):
        return sigmoid_mf(x, self.slope, self.center)


@dataclass(frozen=True)
class It2GaussianBasis:
    """Gaussian interval type-2 basis with ``sigma_upper > sigma_lower > 0``."""

    center: float
    lower_width_raw: float
    gap_raw: float
    amp_raw: float = 0.0

    family = "gaussian"

    @classmethod
    def from_widths(cls, center, sigma_lower, sigma_upper, amplitude=1.0):
        if not sigma_upper > sigma_lower + WIDTH_FLOOR:
            raise ParameterDomainError("sigma_upper must exceed sigma_lower by more than 1e-4")
        return cls(
            float(center),
            float(raw_for_width(sigma_lower)),
            float(raw_for_width(sigma_upper - sigma_lower)),
            float(inverse_softplus(amplitude)),
        )

    @property
    def sigma_lower(self):
        return float(positive(self.lower_width_raw))

    @property
    def sigma_upper(self):
        return self.sigma_lower + float(positive(self.gap_raw))

    @property
    def amplitude(self):
        return float(softplus(self.amp_raw))

    def membership(self, x):
        return type_reduce(*it2_memberships(x, self))


T1Basis = Union[GaussianBasis, BellBasis, SigmoidBasis]
Basis = Union[GaussianBasis, BellBasis, SigmoidBasis, It2GaussianBasis]


def it2_memberships(x, basis: It2GaussianBasis):
    """Upper and lower membership degrees ``(UMF, LMF)`` of ``x``."""
    umf = t1_gaussian(x, basis.center, basis.sigma_upper)
    lmf = t1_gaussian(x, basis.center, basis.sigma_lower)
    return umf, lmf


@dataclass(frozen=True)
class Edge:
    """K homogeneous bases connecting one input to one rule unit."""

    bases: tuple

    def __post_init__(self):
        if len(self.bases) < 1:
            raise ParameterDomainError("an edge needs at least one basis")
        kinds = {type(b) for b in self.bases}
        if len(kinds) != 1:
            raise ParameterDomainError("edge bases must share a single family")

    @property
    def total_amplitude(self):
        return sum(b.amplitude for b in self.bases)


def edge_activate(x, edge: Edge, mask_value=1.0):
    """Masked, amplitude-weighted sum of the edge's basis memberships."""
    if np.any(np.asarray(mask_value) < 0) or np.any(np.asarray(mask_value) > 1):
        raise ParameterDomainError("mask value must lie in [0, 1]")
    total = 0.0
    for basis in edge.bases:
        total = total + basis.amplitude * basis.membership(x)
    return mask_value * total
