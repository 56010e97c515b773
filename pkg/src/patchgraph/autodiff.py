"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tensor` produced by an operation remembers its operands and a
backward rule.  Calling :meth:`Tensor.backward` on a scalar walks the recorded
trace in reverse topological order and accumulates gradients into every
reachable tensor that requires them.

Binary elementwise ops need identical shapes; the only broadcasting allowed is
a Python scalar against a tensor.  Ops that need structured broadcasting
(bias rows, per-row gates, per-channel bias in convolutions) are separate
primitives with their own backward rules.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ContractError, DomainError, ShapeError

__all__ = [
    "Tensor", "tensor", "trace",
    "matmul", "add", "sub", "mul", "neg", "scale", "add_scalar",
    "relu", "leaky_relu", "sigmoid", "tanh", "exp", "log", "elementwise",
    "sum", "mean", "reshape", "transpose", "take_rows", "linear",
    "scale_rows", "row_normalize", "logsumexp_rows", "diagonal",
    "conv2d", "avg_pool2x", "upsample2x",
]


class Tensor:
    """Array node on the autodiff trace."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self.op = "leaf"
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return transpose(self)

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add_scalar(self, other) if _is_scalar(other) else add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add_scalar(self, -other) if _is_scalar(other) else sub(self, other)

    def __rsub__(self, other):
        return add_scalar(neg(self), other)

    def __mul__(self, other):
        return scale(self, other) if _is_scalar(other) else mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not _is_scalar(other):
            raise ShapeError("tensor division is only defined by a scalar")
        return scale(self, 1.0 / other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def tensor(data, requires_grad=False, name=None):
    return Tensor(data, requires_grad=requires_grad, name=name)


def _is_scalar(x):
    return isinstance(x, (int, float, np.floating, np.integer))


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn, op):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.op = op
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True).reshape(t.shape)
    else:
        t.grad += g


def trace(root):
    """Topologically ordered list of the nodes that ``root`` depends on."""
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
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss):
    if loss.data.size != 1 or loss.ndim > 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    order = trace(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            _accum(node, g)
            continue
        # interior nodes keep their gradient too: handy for probes and tests
        _accum(node, g)
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def _same_shape(a, b, op):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# --- linear algebra ------------------------------------------------------------

def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data

    def bw(g):
        return (g @ bd.T if a.requires_grad else None,
                ad.T @ g if b.requires_grad else None)

    return _make(ad @ bd, (a, b), bw, "matmul")


def linear(x, weight, bias=None):
    """``x @ weight + bias`` with ``bias`` added to every row."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError(f"linear: cannot multiply {x.shape} by {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeError(f"linear: bias shape {bias.shape} does not match {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd
    if bias is None:
        parents = (x, weight)
    else:
        out = out + bias.data
        parents = (x, weight, bias)

    def bw(g):
        grads = (g @ wd.T if x.requires_grad else None,
                 xd.T @ g if weight.requires_grad else None)
        if bias is not None:
            grads += (g.sum(axis=0),)
        return grads

    return _make(out, parents, bw, "linear")


def transpose(a):
    if a.ndim != 2:
        raise ShapeError(f"transpose needs a matrix, got {a.shape}")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def reshape(a, shape):
    shape = tuple(shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"reshape: {a.shape} has {a.size} elements, target {shape}")
    src = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),), "reshape")


def take_rows(a, indices):
    """Gather along the first axis (rows of a matrix, entries of a vector)."""
    idx = np.asarray(indices, dtype=np.intp)
    if a.ndim not in (1, 2):
        raise ShapeError(f"take_rows needs a vector or matrix, got {a.shape}")

    def bw(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(a.data[idx], (a,), bw, "take_rows")


def diagonal(a):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"diagonal needs a square matrix, got {a.shape}")

    def bw(g):
        return (np.diag(g),)

    return _make(np.diag(a.data).copy(), (a,), bw, "diagonal")


# --- elementwise -----------------------------------------------------------------

def add(a, b):
    _same_shape(a, b, "add")
    return _make(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b):
    _same_shape(a, b, "sub")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b):
    _same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def scale(a, c):
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def add_scalar(a, c):
    return _make(a.data + float(c), (a,), lambda g: (g,), "add_scalar")


def relu(a):
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a, slope=0.2):
    mask = a.data > 0
    factor = np.where(mask, 1.0, slope)
    return _make(a.data * factor, (a,), lambda g: (g * factor,), "leaky_relu")


def sigmoid(a):
    x = a.data
    # split by sign so neither branch overflows
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a):
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    x = a.data
    if np.any(x <= 0):
        raise DomainError(f"log of non-positive value (min {x.min()!r})")
    return _make(np.log(x), (a,), lambda g: (g / x,), "log")


_UNARY = {"relu": relu, "sigmoid": sigmoid, "exp": exp, "log": log, "neg": neg,
          "tanh": tanh, "leaky_relu": leaky_relu}
_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(op, *operands, **kwargs):
    """Dispatch an elementwise primitive by name."""
    if op in _BINARY:
        return _BINARY[op](*operands)
    if op in _UNARY:
        return _UNARY[op](*operands, **kwargs)
    if op == "scale":
        return scale(*operands, **kwargs)
    raise ContractError(f"unknown elementwise op {op!r}")


# --- reductions and row-structured ops ---------------------------------------------

def sum(a):  # noqa: A001 - mirrors numpy naming
    shape = a.shape
    return _make(np.array(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),), "sum")


def mean(a):
    shape, n = a.shape, a.size
    return _make(np.array(a.data.mean()), (a,), lambda g: (np.full(shape, float(g) / n),), "mean")


def scale_rows(a, s):
    """Multiply row ``i`` of ``a`` by ``s[i]``."""
    if a.ndim != 2 or s.shape != (a.shape[0],):
        raise ShapeError(f"scale_rows: rows {a.shape} vs scales {s.shape}")
    ad, sd = a.data, s.data

    def bw(g):
        return (g * sd[:, None], (g * ad).sum(axis=1))

    return _make(ad * sd[:, None], (a, s), bw, "scale_rows")


def row_normalize(a, eps=1e-12):
    """Rows divided by their Euclidean norm (floored at ``eps``)."""
    if a.ndim != 2:
        raise ShapeError(f"row_normalize needs a matrix, got {a.shape}")
    ad = a.data
    norm = np.sqrt((ad * ad).sum(axis=1, keepdims=True))
    safe = np.maximum(norm, eps)
    out = ad / safe
    clipped = norm < eps

    def bw(g):
        proj = (g * out).sum(axis=1, keepdims=True)
        grad = (g - np.where(clipped, 0.0, out * proj)) / safe
        return (grad,)

    return _make(out, (a,), bw, "row_normalize")


def logsumexp_rows(a):
    """Stable ``log(sum(exp(row)))`` for every row."""
    if a.ndim != 2:
        raise ShapeError(f"logsumexp_rows needs a matrix, got {a.shape}")
    ad = a.data
    m = ad.max(axis=1, keepdims=True)
    e = np.exp(ad - m)
    s = e.sum(axis=1, keepdims=True)
    out = (m + np.log(s))[:, 0]
    soft = e / s
    return _make(out, (a,), lambda g: (soft * g[:, None],), "logsumexp_rows")


# --- images ------------------------------------------------------------------------

def _out_size(n, k, stride, pad, axis):
    span = n + 2 * pad - k
    if span < 0 or span % stride:
        raise ShapeError(
            f"conv2d: {axis}={n} with kernel {k}, stride {stride}, pad {pad} "
            f"gives non-integral output size")
    return span // stride + 1


def conv2d(x, weight, bias=None, stride=1, pad=0):
    """Zero-padded cross-correlation of a (C, H, W) input."""
    if x.ndim != 3 or weight.ndim != 4 or weight.shape[1] != x.shape[0]:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with kernel {weight.shape}")
    cout, cin, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be square and odd, got {k}x{k2}")
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias shape {bias.shape} for {cout} output channels")
    _, h, w = x.shape
    oh = _out_size(h, k, stride, pad, "h")
    ow = _out_size(w, k, stride, pad, "w")
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad))) if pad else x.data
    cols = kernels.im2col(xp, k, stride)
    w2 = weight.data.reshape(cout, -1)
    out = w2 @ cols
    if bias is not None:
        out += bias.data[:, None]
    out = out.reshape(cout, oh, ow)
    padded_shape = xp.shape
    parents = (x, weight) if bias is None else (x, weight, bias)

    def bw(g):
        g2 = g.reshape(cout, -1)
        gx = None
        if x.requires_grad:
            gxp = kernels.col2im(w2.T @ g2, padded_shape, k, stride)
            gx = gxp[:, pad:pad + h, pad:pad + w] if pad else gxp
        gw = (g2 @ cols.T).reshape(weight.shape) if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=1)

    return _make(out, parents, bw, "conv2d")


def avg_pool2x(x):
    """Non-overlapping 2x2 mean pooling of a (C, H, W) input."""
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2x: spatial size {h}x{w} is not even")
    out = x.data.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))

    def bw(g):
        return (np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) * 0.25,)

    return _make(out, (x,), bw, "avg_pool2x")


def upsample2x(x):
    """Nearest-neighbour 2x upsampling of a (C, H, W) input."""
    c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2)

    def bw(g):
        return (g.reshape(c, h, 2, w, 2).sum(axis=(2, 4)),)

    return _make(out, (x,), bw, "upsample2x")
