"""Dense float64 arrays with a small reverse-mode gradient tape.

Every operation here is polymorphic: given plain ndarrays it returns a plain
ndarray (the fast inference path), and given at least one :class:`Var` it
records an adjoint rule on the variable's tape and returns a new ``Var``.
Model code is therefore written once and serves both prediction and training.

>>> tape = GradTape()
>>> x = tape.watch(np.array(3.0))
>>> y = x * x
>>> tape.gradient(y, [x])[0]
array(6.)
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit, log_softmax as _log_softmax

from .errors import EvaluationError, ShapeError

__all__ = [
    "Var",
    "GradTape",
    "as_matrix",
    "primitive",
    "value_of",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "square",
    "sqrt",
    "exp",
    "log",
    "sigmoid",
    "softplus",
    "matmul",
    "transpose",
    "reshape",
    "sum",
    "mean",
    "einsum",
    "clip_min",
    "log_softmax",
    "grad_check",
]

Matrix = np.ndarray


def as_matrix(a, name="matrix", ndim=2) -> np.ndarray:
    """Coerce ``a`` to a finite float64 array with ``ndim`` dimensions."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{name} contains NaN or Inf")
    return arr


class Var:
    """A value tracked by a :class:`GradTape`."""

    __slots__ = ("value", "tape", "name")
    __array_priority__ = 100  # ndarray op Var defers to Var's reflected ops

    def __init__(self, value, tape, name=None):
        self.value = value
        self.tape = tape
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Var{label}(shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    @property
    def T(self):
        return transpose(self)


class _Node:
    __slots__ = ("out", "parents", "vjps")

    def __init__(self, out, parents, vjps):
        self.out = out
        self.parents = parents
        self.vjps = vjps


class GradTape:
    """Records primitive operations in execution order.

    Execution order is a topological order of the computation graph, so the
    backward sweep simply walks the record in reverse.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.visits = 0

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def watch(self, value, name=None) -> Var:
        return Var(np.asarray(value, dtype=np.float64), self, name)

    def record(self, value, parents, vjps) -> Var:
        out = Var(value, self)
        self.nodes.append(_Node(out, parents, vjps))
        return out

    def gradient(self, target: Var, sources: Iterable[Var]) -> list[np.ndarray]:
        """Adjoints of scalar ``target`` with respect to each source.

        Sources that ``target`` does not depend on get exact zeros.
        """
        sources = list(sources)
        if not isinstance(target, Var):
            return [np.zeros_like(s.value) for s in sources]
        if target.value.size != 1:
            raise ShapeError(f"gradient target must be scalar, got shape {target.shape}")
        grads = {id(target): np.ones_like(target.value)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            self.visits += 1
            for parent, vjp in zip(node.parents, node.vjps):
                if not isinstance(parent, Var):
                    continue
                pg = _unbroadcast(vjp(g), parent.value.shape)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        return [grads.get(id(s), np.zeros_like(s.value)) for s in sources]


def _unbroadcast(g, shape):
    g = np.asarray(g)
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def value_of(a):
    return a.value if isinstance(a, Var) else a


def primitive(value, parents: Sequence, vjps: Sequence[Callable]):
    """Wrap ``value`` as a recorded op if any parent is a :class:`Var`.

    ``vjps[i]`` maps the output adjoint to the (broadcast-shaped) adjoint of
    ``parents[i]``; it is only called for parents that are tracked.
    """
    tape = None
    for p in parents:
        if isinstance(p, Var):
            tape = p.tape
            break
    if tape is None:
        return value
    return tape.record(value, tuple(parents), tuple(vjps))


def add(a, b):
    return primitive(value_of(a) + value_of(b), (a, b), (lambda g: g, lambda g: g))


def sub(a, b):
    return primitive(value_of(a) - value_of(b), (a, b), (lambda g: g, lambda g: -g))


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    return primitive(av * bv, (a, b), (lambda g: g * bv, lambda g: g * av))


def div(a, b):
    av, bv = value_of(a), value_of(b)
    out = av / bv
    return primitive(out, (a, b), (lambda g: g / bv, lambda g: -g * out / bv))


def neg(a):
    return primitive(-value_of(a), (a,), (lambda g: -g,))


def square(a):
    av = value_of(a)
    return primitive(av * av, (a,), (lambda g: 2.0 * g * av,))


def sqrt(a):
    out = np.sqrt(value_of(a))
    return primitive(out, (a,), (lambda g: 0.5 * g / out,))


def exp(a):
    out = np.exp(value_of(a))
    return primitive(out, (a,), (lambda g: g * out,))


def log(a):
    av = value_of(a)
    return primitive(np.log(av), (a,), (lambda g: g / av,))


def sigmoid(a):
    out = expit(value_of(a))
    return primitive(out, (a,), (lambda g: g * out * (1.0 - out),))


def softplus(a):
    av = value_of(a)
    return primitive(np.logaddexp(0.0, av), (a,), (lambda g: g * expit(av),))


def clip_min(a, floor):
    """``max(a, floor)`` with zero adjoint where the floor is active."""
    av = value_of(a)
    keep = av > floor
    return primitive(np.where(keep, av, floor), (a,), (lambda g: g * keep,))


def matmul(a, b):
    av, bv = value_of(a), value_of(b)
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    return primitive(av @ bv, (a, b), (lambda g: g @ bv.T, lambda g: av.T @ g))


def transpose(a):
    return primitive(value_of(a).T, (a,), (lambda g: g.T,))


def reshape(a, shape):
    av = value_of(a)
    return primitive(av.reshape(shape), (a,), (lambda g: g.reshape(av.shape),))


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    av = value_of(a)
    out = np.sum(av, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, av.shape)

    return primitive(out, (a,), (vjp,))


def mean(a, axis=None, keepdims=False):
    av = value_of(a)
    if axis is None:
        count = av.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = math.prod(av.shape[ax] for ax in axes)
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def einsum(spec: str, a, b):
    """Two-operand ``np.einsum`` whose adjoints are again einsums.

    Each index of an operand must appear in the other operand or the output,
    and no index may repeat within a single operand.
    """
    inputs, out_idx = spec.replace(" ", "").split("->")
    a_idx, b_idx = inputs.split(",")
    for idx, other in ((a_idx, b_idx + out_idx), (b_idx, a_idx + out_idx)):
        if len(set(idx)) != len(idx) or not set(idx) <= set(other):
            raise ShapeError(f"einsum spec {spec!r} has no einsum adjoint")
    av, bv = value_of(a), value_of(b)
    out = np.einsum(spec, av, bv)

    def vjp_a(g):
        return _expand_to(np.einsum(f"{out_idx},{b_idx}->{a_idx}", g, bv), av.shape)

    def vjp_b(g):
        return _expand_to(np.einsum(f"{out_idx},{a_idx}->{b_idx}", g, av), bv.shape)

    return primitive(out, (a, b), (vjp_a, vjp_b))


def _expand_to(g, shape):
    # einsum cannot emit size-1 broadcast axes the operand carried
    return np.broadcast_to(g, shape) if g.shape != shape else g


def log_softmax(a, axis=-1):
    out = _log_softmax(value_of(a), axis=axis)

    def vjp(g):
        return g - np.exp(out) * np.sum(g, axis=axis, keepdims=True)

    return primitive(out, (a,), (vjp,))


def grad_check(
    f: Callable[[Mapping[str, object]], object],
    params: Mapping[str, np.ndarray],
    h: float = 1e-5,
) -> float:
    """Largest relative disagreement between tape and central-difference gradients.

    ``f`` receives a mapping with the same keys as ``params`` and must return
    a scalar. The error for each scalar parameter is
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    tape = GradTape()
    watched = {k: tape.watch(v.copy(), name=k) for k, v in base.items()}
    out = f(watched)
    _require_finite(value_of(out), "f(theta)")
    analytic = dict(zip(watched, tape.gradient(out, watched.values())))

    worst = 0.0
    for name, arr in base.items():
        for idx in np.ndindex(arr.shape):
            probe = dict(base)
            plus = arr.copy()
            plus[idx] += h
            probe[name] = plus
            f_plus = float(np.asarray(value_of(f(probe))))
            minus = arr.copy()
            minus[idx] -= h
            probe[name] = minus
            f_minus = float(np.asarray(value_of(f(probe))))
            _require_finite(f_plus, f"f(theta + h) at {name}{list(idx)}")
            _require_finite(f_minus, f"f(theta - h) at {name}{list(idx)}")
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = abs(float(analytic[name][idx]) - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


def _require_finite(v, what):
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"{what} is not finite")
