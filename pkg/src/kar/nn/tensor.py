"""Dense reverse-mode autodiff over numpy arrays.

Every op builds its output eagerly and, when gradients are enabled, records
its parents plus a closure that pushes ``out.grad`` back to them.
``Tensor.backward`` topologically sorts the graph and runs the closures in
reverse.  All arithmetic is float64.
"""

from __future__ import annotations

import contextlib
import threading

import numpy as np

from ..errors import NumericError, ShapeError

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference / benchmarking)."""
    prev = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


def _unbroadcast(grad, shape):
    # sum out dimensions that numpy broadcasting added or stretched
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        # never in place: g may be shared with another parent or be a view
        if self.grad is None:
            self.grad = g
        else:
            self.grad = self.grad + g

    def backward(self):
        if self.data.size != 1:
            raise NumericError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = []
        seen = set()
        stack = [(self, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        # free graph so intermediates can be collected
        for node in order:
            node._parents = ()
            node._backward = None

    # operator sugar
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __pow__(self, p):
        return power(self, p)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    out = Tensor(data)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(a.data / b.data, (a, b), backward)


def power(a, p: float):
    a = as_tensor(a)

    def backward(g):
        a._accum(g * p * a.data ** (p - 1))

    return _make(a.data**p, (a,), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    if b.ndim < 2:
        raise ShapeError(f"matmul needs a right operand of rank >= 2, got {a.shape} @ {b.shape}")
    if a.ndim == 1:
        # a single vector: lift to one row and drop it again after
        return reshape(matmul(reshape(a, (1, a.shape[0])), b), b.shape[:-2] + b.shape[-1:])

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            if b.ndim == 2:
                # fold batch dims into one GEMM instead of a batched product
                k = a.shape[-1]
                b._accum(a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1]))
            else:
                b._accum(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _make(a.data @ b.data, (a, b), backward)


def transpose(a):
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")

    def backward(g):
        a._accum(g.T)

    return _make(a.data.T, (a,), backward)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a._accum(np.broadcast_to(g, a.shape))

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / n)


def reshape(a, shape):
    a = as_tensor(a)

    def backward(g):
        a._accum(g.reshape(a.shape))

    return _make(a.data.reshape(shape), (a,), backward)


def broadcast_to(a, shape):
    a = as_tensor(a)

    def backward(g):
        a._accum(_unbroadcast(g, a.shape))

    return _make(np.broadcast_to(a.data, shape).copy(), (a,), backward)


def getitem(a, idx):
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        a._accum(full)

    return _make(a.data[idx], (a,), backward)


def concat(xs, axis=-1):
    xs = [as_tensor(x) for x in xs]
    ref = xs[0].shape
    ax = axis % len(ref)
    for x in xs[1:]:
        if x.ndim != len(ref) or any(
            x.shape[i] != ref[i] for i in range(len(ref)) if i != ax
        ):
            raise ShapeError(f"concat shape mismatch: {ref} vs {x.shape} along axis {axis}")
    sizes = [x.shape[ax] for x in xs]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            if x.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[ax] = slice(lo, hi)
                x._accum(g[tuple(sl)])

    return _make(np.concatenate([x.data for x in xs], axis=ax), xs, backward)


def stack(xs, axis=0):
    xs = [as_tensor(x) for x in xs]
    for x in xs[1:]:
        if x.shape != xs[0].shape:
            raise ShapeError(f"stack shape mismatch: {xs[0].shape} vs {x.shape}")

    def backward(g):
        for i, x in enumerate(xs):
            if x.requires_grad:
                x._accum(np.take(g, i, axis=axis))

    return _make(np.stack([x.data for x in xs], axis=axis), xs, backward)


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0

    def backward(g):
        x._accum(g * mask)

    return _make(x.data * mask, (x,), backward)


def sigmoid(x):
    x = as_tensor(x)
    # numerically stable in both tails
    z = np.exp(-np.abs(x.data))
    s = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))

    def backward(g):
        x._accum(g * s * (1.0 - s))

    return _make(s, (x,), backward)


def tanh(x):
    x = as_tensor(x)
    t = np.tanh(x.data)

    def backward(g):
        x._accum(g * (1.0 - t * t))

    return _make(t, (x,), backward)


def exp(x):
    x = as_tensor(x)
    e = np.exp(x.data)

    def backward(g):
        x._accum(g * e)

    return _make(e, (x,), backward)


def log(x):
    x = as_tensor(x)

    def backward(g):
        x._accum(g / x.data)

    return _make(np.log(x.data), (x,), backward)


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        x._accum(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return _make(s, (x,), backward)


def masked_softmax(x, mask, axis=-1):
    """Softmax over positions where ``mask`` is true.

    Rows with no valid position yield all zeros (and zero gradient).
    """
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError(f"mask shape {mask.shape} != input shape {x.shape}")
    filled = np.where(mask, x.data, -np.inf)
    mx = filled.max(axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.where(mask, np.exp(np.where(mask, x.data, 0.0) - mx), 0.0)
    denom = e.sum(axis=axis, keepdims=True)
    s = e / np.where(denom > 0, denom, 1.0)

    def backward(g):
        x._accum(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return _make(s, (x,), backward)


def embedding_lookup(table, indices):
    """Gather rows of ``table`` (V, d) at integer ``indices`` of any shape."""
    table = as_tensor(table)
    idx = np.asarray(indices)
    if idx.dtype.kind not in "iu":
        raise ShapeError(f"embedding indices must be integers, got dtype {idx.dtype}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeError(
            f"embedding index out of range [0, {table.shape[0]}) for table {table.shape}"
        )

    def backward(g):
        flat = idx.reshape(-1)
        rows, inverse = np.unique(flat, return_inverse=True)
        summed = np.zeros((len(rows), table.shape[1]))
        np.add.at(summed, inverse, g.reshape(-1, table.shape[1]))
        full = np.zeros_like(table.data)
        full[rows] = summed
        table._accum(full)

    return _make(table.data[idx], (table,), backward)


def affine(x, W, b=None):
    """``x @ W + b`` with W stored (in, out)."""
    x, W = as_tensor(x), as_tensor(W)
    if x.shape[-1] != W.shape[0]:
        raise ShapeError(f"affine shape mismatch: input {x.shape} vs weight {W.shape}")
    out = matmul(x, W)
    return out if b is None else out + b


BCE_EPS = 1e-7


def bce_loss(preds, labels, eps=BCE_EPS):
    """Mean binary cross-entropy on probabilities, clamped to [eps, 1-eps]."""
    preds = as_tensor(preds)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != preds.shape:
        raise ShapeError(f"labels shape {y.shape} != predictions shape {preds.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    p = np.clip(preds.data, eps, 1.0 - eps)
    n = max(p.size, 1)
    loss = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum() / n
    inside = (preds.data > eps) & (preds.data < 1.0 - eps)

    def backward(g):
        preds._accum(g * inside * (p - y) / (p * (1.0 - p)) / n)

    return _make(np.asarray(loss), (preds,), backward)
