"""A small reverse-mode autodiff engine on top of numpy.

Each op returns a new :class:`Tensor` holding its parents and a closure that
maps the output gradient to one gradient per parent. ``backward`` builds a
:class:`Tape` (reverse topological order) and visits every node once.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import ShapeMismatch, UnsupportedOp

_GRAD_ENABLED = [True]


@contextlib.contextmanager
def no_grad():
    """Run ops without recording the graph."""
    prev = _GRAD_ENABLED[0]
    _GRAD_ENABLED[0] = False
    try:
        yield
    finally:
        _GRAD_ENABLED[0] = prev


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.op = "leaf"

    # numpy must not silently swallow a Tensor: arithmetic is routed back to
    # Tensor ops, anything else is refused
    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        op = _UFUNC_OPS.get(ufunc)
        if method != "__call__" or op is None or kwargs:
            raise UnsupportedOp(f"numpy ufunc {ufunc.__name__!r} is not differentiable; use Tensor ops")
        args = [i if isinstance(i, Tensor) else self._lift(i) for i in inputs]
        return op(*args)

    def __array_function__(self, func, types, args, kwargs):
        raise UnsupportedOp(f"numpy function {func.__name__!r} is not differentiable; use Tensor ops")

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # --- graph plumbing ---------------------------------------------------

    @staticmethod
    def _make(data, parents, backward, op) -> "Tensor":
        out = Tensor(data)
        if _GRAD_ENABLED[0] and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
            out.op = op
        return out

    def _lift(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        arr = np.asarray(other)
        if arr.dtype.kind in "biuf" and arr.dtype != self.data.dtype:
            arr = arr.astype(self.data.dtype)
        return Tensor(arr)

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ShapeMismatch("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        tape = Tape.from_output(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in tape.nodes:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # --- arithmetic -------------------------------------------------------

    def __add__(self, other):
        o = self._lift(other)
        a, b = self.shape, o.shape
        return Tensor._make(self.data + o.data, (self, o),
                            lambda g: (_unbroadcast(g, a), _unbroadcast(g, b)), "add")

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other):
        o = self._lift(other)
        a, b = self.shape, o.shape
        return Tensor._make(self.data - o.data, (self, o),
                            lambda g: (_unbroadcast(g, a), _unbroadcast(-g, b)), "sub")

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        x, y = self.data, o.data
        return Tensor._make(x * y, (self, o),
                            lambda g: (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape)), "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        x, y = self.data, o.data
        out = x / y
        return Tensor._make(out, (self, o),
                            lambda g: (_unbroadcast(g / y, x.shape), _unbroadcast(-g * out / y, y.shape)), "div")

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, p):
        if isinstance(p, Tensor):
            raise UnsupportedOp("tensor exponents are not supported")
        x = self.data
        return Tensor._make(x ** p, (self,), lambda g: (g * p * x ** (p - 1),), "pow")

    def __matmul__(self, other):
        o = self._lift(other)
        x, y = self.data, o.data
        if x.ndim < 2 or y.ndim < 2:
            raise ShapeMismatch("matmul needs operands with at least 2 dimensions")

        def back(g):
            gx = _unbroadcast(g @ np.swapaxes(y, -1, -2), x.shape)
            gy = _unbroadcast(np.swapaxes(x, -1, -2) @ g, y.shape)
            return gx, gy

        return Tensor._make(x @ y, (self, o), back, "matmul")

    def __rmatmul__(self, other):
        return self._lift(other) @ self

    # --- elementwise ------------------------------------------------------

    def exp(self):
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,), "exp")

    def log(self):
        x = self.data
        return Tensor._make(np.log(x), (self,), lambda g: (g / x,), "log")

    def sqrt(self):
        out = np.sqrt(self.data)
        return Tensor._make(out, (self,), lambda g: (g * 0.5 / out,), "sqrt")

    def abs(self):
        s = np.sign(self.data)
        return Tensor._make(np.abs(self.data), (self,), lambda g: (g * s,), "abs")

    def relu(self):
        m = self.data > 0
        return Tensor._make(self.data * m, (self,), lambda g: (g * m,), "relu")

    def leaky_relu(self, slope: float = 0.01):
        scale = np.where(self.data > 0, 1.0, slope).astype(self.data.dtype)
        return Tensor._make(self.data * scale, (self,), lambda g: (g * scale,), "leaky_relu")

    def sigmoid(self):
        x = self.data
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return Tensor._make(out, (self,), lambda g: (g * out * (1.0 - out),), "sigmoid")

    def tanh(self):
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out * out),), "tanh")

    def sin(self):
        x = self.data
        return Tensor._make(np.sin(x), (self,), lambda g: (g * np.cos(x),), "sin")

    def cos(self):
        x = self.data
        return Tensor._make(np.cos(x), (self,), lambda g: (-g * np.sin(x),), "cos")

    def clip(self, lo=None, hi=None):
        x = self.data
        out = np.clip(x, lo, hi)
        m = out == x
        return Tensor._make(out, (self,), lambda g: (g * m,), "clip")

    # --- reductions and shape ----------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), back, "sum")

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis, keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return Tensor._make(self.data.reshape(shape), (self,), lambda g: (g.reshape(old),), "reshape")

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        axes = axes or tuple(reversed(range(self.ndim)))
        inv = np.argsort(axes)
        return Tensor._make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),), "transpose")

    @property
    def T(self):
        return self.transpose()

    def __getitem__(self, idx):
        shape, dtype = self.shape, self.data.dtype
        advanced = any(isinstance(i, (np.ndarray, list)) for i in (idx if isinstance(idx, tuple) else (idx,)))
        if isinstance(idx, Tensor):
            raise UnsupportedOp("index with numpy arrays, not Tensors")

        def back(g):
            full = np.zeros(shape, dtype=dtype)
            if advanced:
                np.add.at(full, idx, g)
            else:
                full[idx] += g
            return (full,)

        return Tensor._make(self.data[idx], (self,), back, "getitem")

    def cumsum(self, axis: int):
        def back(g):
            return (np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis),)

        return Tensor._make(np.cumsum(self.data, axis=axis), (self,), back, "cumsum")

    def log_softmax(self, axis: int = -1):
        x = self.data
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

        def back(g):
            return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

        return Tensor._make(out, (self,), back, "log_softmax")

    def softmax(self, axis: int = -1):
        return self.log_softmax(axis).exp()


class Tape:
    """Nodes of a graph in reverse topological order (output first)."""

    def __init__(self, nodes):
        self.nodes = nodes

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order, seen = [], set()
        stack = [(out, False)]
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
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        order.reverse()
        return cls(order)

    def __len__(self):
        return len(self.nodes)

    def ops(self) -> list:
        return [n.op for n in self.nodes]


def tensor(data, requires_grad=False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), back, "concat")


def stack(tensors, axis: int = 0) -> Tensor:
    return concat([t.reshape(t.shape[:axis] + (1,) + t.shape[axis:]) if axis >= 0 else
                   t.reshape(t.shape + (1,)) for t in tensors], axis=axis)


def where(mask, a: Tensor, b: Tensor) -> Tensor:
    mask = np.asarray(mask, dtype=bool)
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b)
    sa, sb = a.shape, b.shape
    return Tensor._make(
        np.where(mask, a.data, b.data), (a, b),
        lambda g: (_unbroadcast(g * mask, sa), _unbroadcast(g * ~mask, sb)), "where",
    )


def index_add(size: int, index, values: Tensor) -> Tensor:
    """Scatter-add rows of ``values`` into a zero tensor with ``size`` rows."""
    index = np.asarray(index)
    out = np.zeros((size,) + values.shape[1:], dtype=values.dtype)
    np.add.at(out, index, values.data)
    return Tensor._make(out, (values,), lambda g: (g[index],), "index_add")


def segment_sum(values: Tensor, index, size: int) -> Tensor:
    return index_add(size, index, values)


_UFUNC_OPS = {
    np.add: lambda a, b: a + b,
    np.subtract: lambda a, b: a - b,
    np.multiply: lambda a, b: a * b,
    np.true_divide: lambda a, b: a / b,
    np.matmul: lambda a, b: a @ b,
    np.negative: lambda a: -a,
    np.exp: lambda a: a.exp(),
    np.log: lambda a: a.log(),
    np.sqrt: lambda a: a.sqrt(),
    np.tanh: lambda a: a.tanh(),
}


def pad(x: Tensor, widths) -> Tensor:
    """Zero padding; ``widths`` as for ``np.pad``."""
    widths = tuple(tuple(w) for w in widths)
    sl = tuple(slice(a, a + n) for (a, _), n in zip(widths, x.shape))
    return Tensor._make(np.pad(x.data, widths), (x,), lambda g: (g[sl],), "pad")


def group_norm(x: Tensor, gamma: Tensor, beta: Tensor, groups: int, eps: float = 1e-5) -> Tensor:
    """Channels-last group normalization over every axis but the batch axis and the group."""
    shape = x.shape
    c = shape[-1]
    if c % groups:
        raise ValueError(f"{c} channels do not split into {groups} groups")
    xs = x.data.reshape(shape[0], -1, groups, c // groups)
    mean = xs.mean(axis=(1, 3), keepdims=True)
    cen = xs - mean
    rstd = 1.0 / np.sqrt((cen * cen).mean(axis=(1, 3), keepdims=True) + eps)
    xhat = cen * rstd
    y = xhat.reshape(shape) * gamma.data + beta.data

    def back(g):
        red = tuple(range(len(shape) - 1))
        gg = (g * xhat.reshape(shape)).sum(axis=red)
        gb = g.sum(axis=red)
        gh = (g * gamma.data).reshape(xs.shape)
        gx = rstd * (gh - gh.mean(axis=(1, 3), keepdims=True)
                     - xhat * (gh * xhat).mean(axis=(1, 3), keepdims=True))
        return gx.reshape(shape), gg, gb

    return Tensor._make(y.astype(x.dtype, copy=False), (x, gamma, beta), back, "group_norm")
