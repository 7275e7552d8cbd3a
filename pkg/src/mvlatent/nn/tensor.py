"""Reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Tensor` records the operation that produced it together with a
closure mapping the output gradient to gradients of its parents. Graphs are
only recorded when some input has ``requires_grad=True``; everything else
is plain numpy work.
"""

from contextlib import contextmanager

import numpy as np
from scipy.special import expit

from .. import kernels

_CHECKED = False


class NumericError(FloatingPointError):
    """A non-finite value appeared where finite values are required."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


def set_checked(flag):
    """Enable or disable finite-value checks on every tensor construction."""
    global _CHECKED
    _CHECKED = bool(flag)


def is_checked():
    return _CHECKED


@contextmanager
def checked_mode(flag=True):
    prev = _CHECKED
    set_checked(flag)
    try:
        yield
    finally:
        set_checked(prev)


class Tensor:
    __slots__ = ("data", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=np.float64)
        if _CHECKED and not np.all(np.isfinite(arr)):
            label = f" in {name!r}" if name else ""
            raise NumericError(f"non-finite value{label}")
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return _node(
            a.data + b.data,
            (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return _node(
            a.data - b.data,
            (a, b),
            lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        )

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return _node(
            a.data * b.data,
            (a, b),
            lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other
        out = a.data / b.data
        return _node(
            out,
            (a, b),
            lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)),
        )

    def __neg__(self):
        return _node(-self.data, (self,), lambda g: (-g,))

    def __matmul__(self, other):
        return matmul(self, other)

    # reductions and elementwise -------------------------------------------

    def sum(self, axis=None):
        a = self
        out = a.data.sum(axis=axis)

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape).copy(),)

        return _node(out, (a,), back)

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis) * (1.0 / n)

    def exp(self):
        out = np.exp(self.data)
        return _node(out, (self,), lambda g: (g * out,))

    def log(self):
        a = self
        return _node(np.log(a.data), (a,), lambda g: (g / a.data,))

    def square(self):
        a = self
        return _node(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward):
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)
    return Tensor(data)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# functional ops ------------------------------------------------------------


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shapes {a.shape} and {b.shape} do not align")
    return _node(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def affine(x, W, b):
    """``x @ W + b`` as a single recorded node."""
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if x.ndim != 2 or x.shape[1] != W.shape[0]:
        raise DimensionError(f"input width {x.shape[-1]} does not match layer input {W.shape[0]}")
    out = x.data @ W.data
    out += b.data
    return _node(out, (x, W, b), lambda g: (g @ W.data.T, x.data.T @ g, g.sum(axis=0)))


def relu_dropout(pre, mask=None, scale=1.0):
    """ReLU followed by an optional inverted-dropout mask multiply."""
    pre = as_tensor(pre)
    if mask is not None and mask.shape != pre.shape:
        raise DimensionError(f"dropout mask shape {mask.shape} != activation shape {pre.shape}")
    out = kernels.relu_dropout(pre.data, mask, scale)
    return _node(out, (pre,), lambda g: (kernels.relu_dropout_grad(g, pre.data, mask, scale),))


def dropout(x, mask, scale):
    if mask.shape != x.shape:
        raise DimensionError(f"dropout mask shape {mask.shape} != activation shape {x.shape}")
    return x * Tensor(mask * scale)


def sigmoid(x):
    x = as_tensor(x)
    s = expit(x.data)
    return _node(s, (x,), lambda g: (g * s * (1.0 - s),))


def log_clamped(x, floor):
    """``log(max(x, floor))``; zero gradient where the floor is active."""
    x = as_tensor(x)
    active = x.data > floor
    safe = np.where(active, x.data, floor)
    return _node(np.log(safe), (x,), lambda g: (np.where(active, g / safe, 0.0),))


def clip(x, lo, hi):
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return _node(np.clip(x.data, lo, hi), (x,), lambda g: (np.where(inside, g, 0.0),))


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return _node(out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)))


def columns(x, start, stop):
    x = as_tensor(x)

    def back(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        return (full,)

    return _node(x.data[:, start:stop], (x,), back)


def reshape(x, shape):
    x = as_tensor(x)
    return _node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def take_rows(x, idx):
    """Gather rows ``x[idx]``; repeated indices accumulate gradient."""
    x = as_tensor(x)

    def back(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return _node(x.data[idx], (x,), back)


def row_norm(x):
    """Euclidean norm of every row; subgradient 0 at the origin."""
    x = as_tensor(x)
    n = np.sqrt((x.data * x.data).sum(axis=1))

    def back(g):
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(n[:, None] > 0.0, x.data / n[:, None], 0.0)
        return (g[:, None] * unit,)

    return _node(n, (x,), back)


def relu(x):
    return relu_dropout(x)


def diag_kl_rows(mq, lq, mp, lp):
    """Row-wise KL(N(mq, e^lq) || N(mp, e^lp)) summed over columns."""
    mq, lq, mp, lp = (as_tensor(t) for t in (mq, lq, mp, lp))
    shape = mq.shape
    for t in (lq, mp, lp):
        if t.shape != shape:
            raise DimensionError(f"gaussian parameter shapes differ: {shape} vs {t.shape}")
    out = kernels.diag_kl_rows(mq.data, lq.data, mp.data, lp.data)
    return _node(
        out,
        (mq, lq, mp, lp),
        lambda g: kernels.diag_kl_grads(g, mq.data, lq.data, mp.data, lp.data),
    )


def iso_logpdf_rows(x, mean, sigma):
    """Row-wise log N(x; mean, sigma^2 I)."""
    x, mean = as_tensor(x), as_tensor(mean)
    if x.shape != mean.shape:
        raise DimensionError(f"observation shape {x.shape} != mean shape {mean.shape}")
    out = kernels.iso_logpdf_rows(x.data, mean.data, sigma)

    def back(g):
        gm = kernels.iso_logpdf_grad_mean(g, x.data, mean.data, sigma)
        return (-gm, gm)

    return _node(out, (x, mean), back)


# backward pass -------------------------------------------------------------


def _topo_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def gradients(loss, wrt):
    """Reverse-mode gradients of scalar ``loss`` w.r.t. the tensors in ``wrt``.

    ``wrt`` maps names to leaf tensors. Returns a dict of numpy arrays with
    the same keys; tensors not reachable from ``loss`` get zero gradients.
    """
    if loss.size != 1:
        raise DimensionError(f"loss must be a scalar, got shape {loss.shape}")
    for name, t in wrt.items():
        if not (isinstance(t, Tensor) and t.requires_grad):
            raise LookupError(f"parameter {name!r} is not a recorded leaf")
    grads = {}
    if loss.requires_grad:
        grads[id(loss)] = np.ones_like(loss.data)
        for node in reversed(_topo_order(loss)):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
    return {
        name: np.array(grads[id(t)], dtype=np.float64) if id(t) in grads else np.zeros_like(t.data)
        for name, t in wrt.items()
    }
