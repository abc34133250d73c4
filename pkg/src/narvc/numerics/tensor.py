"""Dense float64 tensors with tape-based reverse-mode differentiation.

A :class:`Graph` records every primitive executed while it is active; calling
``backward`` replays the tape in reverse exactly once and accumulates
gradients into the participating leaf tensors. With no graph active the same
primitives run as plain numpy code, which is the inference fast path.
"""
from __future__ import annotations

import numpy as np

from ..errors import DimensionError, NumericsError, StateError, UsageError

__all__ = [
    "Tensor",
    "Graph",
    "backward",
    "tensor",
    "zeros",
    "ones",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "linear",
    "tsum",
    "tmean",
    "tabs",
    "square",
    "exp",
    "log",
    "reshape",
    "transpose",
    "index_rows",
    "stop_gradient",
]

_CURRENT_GRAPH: "Graph | None" = None


def _as_f64(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


def _check_finite(arr: np.ndarray, what: str = "value") -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite {what} encountered")


class Tensor:
    """Immutable-by-convention float64 array, optionally tracked for gradients.

    ``grad`` is populated by :func:`backward` for leaves created with
    ``requires_grad=True``; repeated backward passes over different graphs
    accumulate additively.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = _as_f64(data).copy()
        _check_finite(arr, "tensor input")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = arr
        t.requires_grad = requires_grad
        t.grad = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError("item() requires a single-element tensor")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # arithmetic sugar; scalars are treated as constants
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_const(other, like=self), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, shape):
        return reshape(self, shape)


class Graph:
    """Ordered tape of executed primitives, good for exactly one backward pass."""

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []
        self._produced: set[int] = set()
        self._consumed = False

    def __enter__(self) -> "Graph":
        global _CURRENT_GRAPH
        if _CURRENT_GRAPH is not None:
            raise StateError("a graph is already recording; graphs do not nest")
        _CURRENT_GRAPH = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        global _CURRENT_GRAPH
        _CURRENT_GRAPH = None

    @property
    def num_ops(self) -> int:
        return len(self._nodes)

    def _record(self, out: Tensor, inputs: tuple[Tensor, ...], bwd) -> None:
        self._nodes.append((out, inputs, bwd))
        self._produced.add(id(out))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every requires_grad leaf."""
        if self._consumed:
            raise StateError("graph already consumed by a previous backward pass")
        if loss.data.size != 1:
            raise UsageError("backward requires a scalar loss")
        self._consumed = True

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        tensors: dict[int, Tensor] = {id(loss): loss}
        for out, inputs, bwd in reversed(self._nodes):
            gout = grads.pop(id(out), None)
            if gout is None:
                continue
            tensors.pop(id(out), None)
            gins = bwd(gout)
            for t, gi in zip(inputs, gins):
                if gi is None or not t.requires_grad:
                    continue
                key = id(t)
                if key in grads:
                    grads[key] += gi
                else:
                    grads[key] = np.array(gi, dtype=np.float64, copy=True)
                    tensors[key] = t

        for key, g in grads.items():
            t = tensors[key]
            if not t.requires_grad or key in self._produced:
                continue
            if t.grad is None:
                t.grad = g.copy()
            else:
                t.grad += g


def backward(loss: Tensor, graph: Graph) -> None:
    graph.backward(loss)


def _apply(out_data: np.ndarray, inputs: tuple[Tensor, ...], bwd) -> Tensor:
    """Wrap a primitive's numpy output, recording it on the active graph."""
    _check_finite(out_data, "operation output")
    g = _CURRENT_GRAPH
    track = g is not None and any(t.requires_grad for t in inputs)
    out = Tensor._wrap(out_data, track)
    if track:
        g._record(out, inputs, bwd)
    return out


def _const(value, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = _as_f64(value)
    _check_finite(arr, "constant")
    return Tensor._wrap(arr, False)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor._wrap(np.zeros(shape, dtype=np.float64), requires_grad)


def ones(shape, requires_grad: bool = False) -> Tensor:
    return Tensor._wrap(np.ones(shape, dtype=np.float64), requires_grad)


def add(a: Tensor, b) -> Tensor:
    a = _const(a)
    b = _const(b, like=a)
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _apply(out, (a, b), bwd)


def sub(a: Tensor, b) -> Tensor:
    a = _const(a)
    b = _const(b, like=a)
    out = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _apply(out, (a, b), bwd)


def mul(a: Tensor, b) -> Tensor:
    a = _const(a)
    b = _const(b, like=a)
    out = a.data * b.data
    ad, bd = a.data, b.data

    def bwd(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _apply(out, (a, b), bwd)


def neg(a: Tensor) -> Tensor:
    return _apply(-a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2 or a.ndim != b.ndim:
        raise DimensionError(
            f"matmul expects equal-rank arrays of rank >= 2, got {a.shape} @ {b.shape}"
        )
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    out = ad @ bd

    def bwd(g):
        return g @ bd.swapaxes(-1, -2), ad.swapaxes(-1, -2) @ g

    return _apply(out, (a, b), bwd)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x[T,I] @ w[I,O] (+ b[O])."""
    y = matmul(x, w)
    if b is not None:
        y = add(y, b)
    return y


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)
    shape = a.data.shape

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        g2 = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g2, shape).copy(),)

    return _apply(np.asarray(out), (a,), bwd)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def tabs(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    return _apply(np.abs(a.data), (a,), lambda g: (g * sign,))


def square(a: Tensor) -> Tensor:
    ad = a.data
    return _apply(ad * ad, (a,), lambda g: (2.0 * g * ad,))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _apply(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    ad = a.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(ad)
    return _apply(out, (a,), lambda g: (g / ad,))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape
    return _apply(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return _apply(
        np.ascontiguousarray(a.data.transpose(axes)),
        (a,),
        lambda g: (g.transpose(inv),),
    )


def index_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Gather rows ``a[idx]``; the backward pass scatter-adds over duplicates."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise DimensionError("index_rows expects a 1-D index array")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[0]):
        raise DimensionError("index_rows index out of range")
    shape = a.data.shape

    def bwd(g):
        gx = np.zeros(shape, dtype=np.float64)
        np.add.at(gx, idx, g)
        return (gx,)

    return _apply(a.data[idx], (a,), bwd)


def stop_gradient(a: Tensor) -> Tensor:
    """Identity forward; contributes exactly zero gradient to its input."""
    return Tensor._wrap(a.data.copy(), False)
