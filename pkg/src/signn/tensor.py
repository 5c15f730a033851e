"""Dense float64 tensors with a dynamic reverse-mode tape.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients.  The tape is
rebuilt on every forward pass, so sequence lengths can change freely
between calls.

Spike emission is the one non-differentiable op.  :func:`heaviside`
takes a gradient mode: :class:`Surrogate` keeps the exact step forward
and substitutes a rectangular window in the backward pass, while
:class:`Smooth` replaces the step by a steep sigmoid everywhere so that
finite differences can be compared against the tape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import expit as _sigmoid

from .errors import ConfigError, DimensionError, NumericError, RangeError

DTYPE = np.float64


@dataclass(frozen=True)
class Surrogate:
    """Exact step forward, rectangular surrogate derivative of total area 1."""

    width: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"surrogate width must be positive, got {self.width}")


@dataclass(frozen=True)
class Smooth:
    """sigmoid(steepness * x) forward with its exact derivative."""

    steepness: float = 4.0

    def __post_init__(self):
        if not self.steepness > 0:
            raise ConfigError(f"smooth steepness must be positive, got {self.steepness}")


GradMode = Union[Surrogate, Smooth]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, parents: tuple = (), backward=None, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def T(self):
        return transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def backward(self, seed=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf requiring grad."""
        if seed is None:
            if self.data.size != 1:
                raise DimensionError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            seed = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(seed, dtype=DTYPE)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


class Param(Tensor):
    """A named trainable leaf.  ``grad`` always has the value's shape."""

    __slots__ = ()

    def __init__(self, value, name: str):
        super().__init__(np.array(value, dtype=DTYPE), requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    @property
    def value(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)


def reset_grads(params: Iterable[Param]):
    for p in params:
        p.zero_grad()


def _topo_order(root: Tensor) -> list:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, parents, backward, requires_grad=True)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# elementwise arithmetic

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def spmm(adj, x) -> Tensor:
    """Constant (possibly scipy-sparse) matrix times a tensor."""
    x = as_tensor(x)
    if adj.shape[1] != x.shape[0]:
        raise DimensionError(f"spmm: cannot multiply {adj.shape} by {x.shape}")
    out = adj @ x.data
    adj_t = adj.T.tocsr() if sp.issparse(adj) else adj.T
    return _make(np.asarray(out), (x,), lambda g: (np.asarray(adj_t @ g),))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.T, (a,), lambda g: (g.T,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return _make(y, (x,), lambda g: (g * y * (1.0 - y),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _make(y, (x,), lambda g: (g * (1.0 - y * y),))


def heaviside(x, mode: GradMode) -> Tensor:
    """Spike nonlinearity; Theta(0) = 1."""
    x = as_tensor(x)
    if isinstance(mode, Surrogate):
        y = (x.data >= 0).astype(DTYPE)
        window = (np.abs(x.data) <= mode.width / 2).astype(DTYPE) / mode.width
        return _make(y, (x,), lambda g: (g * window,))
    if isinstance(mode, Smooth):
        k = mode.steepness
        y = _sigmoid(k * x.data)
        return _make(y, (x,), lambda g: (g * k * y * (1.0 - y),))
    raise ConfigError(f"unknown gradient mode {mode!r}")


def detach(x) -> Tensor:
    return Tensor(as_tensor(x).data)


# reductions and reshaping

def sum(x, axis=None, keepdims=False) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(out, (x,), back)


def mean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def getitem(x, key) -> Tensor:
    x = as_tensor(x)
    out = x.data[key]

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, key, g)
        return (full,)

    return _make(out, (x,), back)


def take_rows(x, rows) -> Tensor:
    return getitem(x, (np.asarray(rows, dtype=np.intp),))


def concat(tensors: Sequence, axis: int = 1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ConfigError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in ts]}") from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(out, tuple(ts), lambda g: tuple(np.split(g, bounds, axis=axis)))


def stack(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ConfigError("stack needs at least one tensor")
    try:
        out = np.stack([t.data for t in ts], axis=axis)
    except ValueError:
        raise DimensionError(f"stack: incompatible shapes {[t.shape for t in ts]}") from None
    return _make(out, tuple(ts), lambda g: tuple(np.moveaxis(g, axis, 0)))


def maximum(tensors: Sequence) -> Tensor:
    """Elementwise max over a list; ties send the gradient to the first winner."""
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ConfigError("maximum needs at least one tensor")
    stacked = np.stack([t.data for t in ts])
    winner = stacked.argmax(axis=0)

    def back(g):
        return tuple(np.where(winner == i, g, 0.0) for i in range(len(ts)))

    return _make(stacked.max(axis=0), tuple(ts), back)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (x,), back)


def cross_entropy(scores, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under row softmax."""
    scores = as_tensor(scores)
    labels = np.asarray(labels, dtype=np.intp)
    if scores.data.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise DimensionError(f"cross_entropy: scores {scores.shape} vs {labels.shape[0]} labels")
    n, c = scores.shape
    if n == 0:
        raise DimensionError("cross_entropy over an empty batch")
    if labels.min() < 0 or labels.max() >= c:
        raise RangeError(f"label out of range for {c} classes")
    z = scores.data - scores.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = np.mean(logsum - z[rows, labels])

    def back(g):
        p = np.exp(z - logsum[:, None])
        p[rows, labels] -= 1.0
        return (g * p / n,)

    return _make(loss, (scores,), back)


# finite-difference verification

@dataclass
class GradCheckReport:
    max_rel_err: float
    tol: float
    per_param: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(f: Callable[[], Tensor], params: Sequence[Param], eps: float = 1e-6,
               tol: float = 1e-4, floor: float = 1e-8) -> GradCheckReport:
    """Compare tape gradients of the scalar ``f()`` against central differences.

    ``f`` must be deterministic and, if it spikes, run in :class:`Smooth` mode.
    ``floor`` bounds the denominator so entries with vanishing gradient are
    judged on absolute error.
    """
    reset_grads(params)
    loss = f()
    if not np.isfinite(loss.data).all():
        raise NumericError(f"grad_check aborted: loss is {loss.data!r}")
    loss.backward()
    report = GradCheckReport(max_rel_err=0.0, tol=tol)
    for p in params:
        analytic = p.grad.copy()
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f().item()
            flat[i] = orig - eps
            down = f().item()
            flat[i] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError(f"grad_check aborted: non-finite loss perturbing {p.name}[{i}]")
            nflat[i] = (up - down) / (2 * eps)
        err = float(rel_error(analytic, numeric, floor).max()) if analytic.size else 0.0
        report.per_param[p.name] = err
        report.max_rel_err = max(report.max_rel_err, err)
    return report
