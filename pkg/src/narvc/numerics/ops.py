"""Neural-net primitives on top of the tape: convolutions, norms, activations."""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError, MaskError, StateError
from .tensor import Tensor, _apply

__all__ = [
    "conv1d",
    "depthwise_conv1d",
    "layer_norm",
    "BatchNormState",
    "batch_norm_1d",
    "activation",
    "relu",
    "swish",
    "glu",
    "tanh",
    "sigmoid",
    "softmax_lastdim",
    "dropout",
]


def _im2col(x: np.ndarray, k: int, padding: str) -> np.ndarray:
    """(T, C) -> (T, K, C) sliding windows with zero padding."""
    t, c = x.shape
    if padding == "same":
        left = (k - 1) // 2
        right = k - 1 - left
    elif padding == "causal":
        left, right = k - 1, 0
    else:
        raise ConfigError(f"unknown padding mode {padding!r}")
    xp = np.zeros((t + left + right, c), dtype=np.float64)
    xp[left : left + t] = x
    cols = np.empty((t, k, c), dtype=np.float64)
    for j in range(k):
        cols[:, j, :] = xp[j : j + t]
    return cols


def conv1d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, padding: str = "same") -> Tensor:
    """Length-preserving 1-D convolution.

    x: (T, C_in); kernel: (K, C_in, C_out); bias: (C_out,).
    """
    if x.ndim != 2 or kernel.ndim != 3:
        raise DimensionError(f"conv1d expects x (T,Cin) and kernel (K,Cin,Cout), got {x.shape}, {kernel.shape}")
    k, cin, cout = kernel.shape
    if x.shape[1] != cin:
        raise DimensionError(f"conv1d channel mismatch: input has {x.shape[1]}, kernel expects {cin}")
    if padding == "same" and k % 2 == 0:
        raise ConfigError(f"'same' padding requires an odd kernel size, got {k}")
    if bias is not None and bias.shape != (cout,):
        raise DimensionError(f"conv1d bias must have shape ({cout},), got {bias.shape}")

    t = x.shape[0]
    cols = _im2col(x.data, k, padding)  # (T, K, Cin)
    w2 = kernel.data.reshape(k * cin, cout)
    out = cols.reshape(t, k * cin) @ w2
    if bias is not None:
        out = out + bias.data

    if padding == "same":
        left = (k - 1) // 2
    else:
        left = k - 1

    def bwd(g):
        gw = cols.reshape(t, k * cin).T @ g  # (K*Cin, Cout)
        gcols = (g @ w2.T).reshape(t, k, cin)
        gxp = np.zeros((t + k - 1, cin), dtype=np.float64)
        for j in range(k):
            gxp[j : j + t] += gcols[:, j, :]
        gx = gxp[left : left + t]
        gb = g.sum(axis=0) if bias is not None else None
        if bias is not None:
            return gx, gw.reshape(k, cin, cout), gb
        return gx, gw.reshape(k, cin, cout)

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return _apply(out, inputs, bwd)


def depthwise_conv1d(x: Tensor, kernel: Tensor, padding: str = "same") -> Tensor:
    """Per-channel 1-D convolution: x (T, C), kernel (K, C)."""
    if x.ndim != 2 or kernel.ndim != 2:
        raise DimensionError("depthwise_conv1d expects x (T,C) and kernel (K,C)")
    k, c = kernel.shape
    if x.shape[1] != c:
        raise DimensionError(f"depthwise channel mismatch: input has {x.shape[1]}, kernel has {c}")
    if padding != "same":
        raise ConfigError("depthwise_conv1d supports 'same' padding only")
    if k % 2 == 0:
        raise ConfigError(f"'same' padding requires an odd kernel size, got {k}")

    t = x.shape[0]
    cols = _im2col(x.data, k, padding)  # (T, K, C)
    kd = kernel.data
    out = np.einsum("tkc,kc->tc", cols, kd)
    left = (k - 1) // 2

    def bwd(g):
        gw = np.einsum("tkc,tc->kc", cols, g)
        gxp = np.zeros((t + k - 1, c), dtype=np.float64)
        for j in range(k):
            gxp[j : j + t] += g * kd[j]
        return gxp[left : left + t], gw

    return _apply(out, (x, kernel), bwd)


def layer_norm(x: Tensor, gain: Tensor, offset: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row normalization over the last axis, then affine gain/offset."""
    if x.shape[-1] != gain.shape[-1] or gain.shape != offset.shape:
        raise DimensionError(f"layer_norm shape mismatch: {x.shape} vs {gain.shape}/{offset.shape}")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + offset.data
    n = xd.shape[-1]
    gd = gain.data

    def bwd(g):
        gxhat = g * gd
        # d/dx of (x-mu)/sqrt(var+eps), all stats over the last axis
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        axes = tuple(range(g.ndim - 1))
        gg = (g * xhat).sum(axis=axes)
        gb = g.sum(axis=axes)
        return gx, gg, gb

    del n
    return _apply(out, (x, gain, offset), bwd)


class BatchNormState:
    """Running mean/variance for one batch-norm layer (not learned)."""

    def __init__(self, channels: int):
        self.mean = np.zeros(channels, dtype=np.float64)
        self.var = np.ones(channels, dtype=np.float64)
        self.initialized = False

    def copy(self) -> "BatchNormState":
        s = BatchNormState(self.mean.shape[0])
        s.mean = self.mean.copy()
        s.var = self.var.copy()
        s.initialized = self.initialized
        return s


def batch_norm_1d(
    x: Tensor,
    gain: Tensor,
    offset: Tensor,
    state: BatchNormState,
    mode: str,
    momentum: float = 0.99,
    eps: float = 1e-5,
) -> Tensor:
    """Channel-wise normalization over the time axis of x (T, C).

    Train mode normalizes with in-call statistics and folds them into the
    running stats; infer mode uses the stored stats and never mutates them.
    """
    if x.ndim != 2:
        raise DimensionError("batch_norm_1d expects x (T, C)")
    c = x.shape[1]
    if gain.shape != (c,) or offset.shape != (c,):
        raise DimensionError("batch_norm_1d gain/offset must be (C,)")
    xd = x.data
    gd, bd = gain.data, offset.data

    if mode == "train":
        mu = xd.mean(axis=0)
        var = xd.var(axis=0)
        if state.initialized:
            state.mean = momentum * state.mean + (1.0 - momentum) * mu
            state.var = momentum * state.var + (1.0 - momentum) * var
        else:
            state.mean = mu.copy()
            state.var = var.copy()
            state.initialized = True
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (xd - mu) * inv
        out = xhat * gd + bd
        t = xd.shape[0]

        def bwd(g):
            gxhat = g * gd
            gx = inv * (
                gxhat
                - gxhat.mean(axis=0)
                - xhat * (gxhat * xhat).mean(axis=0)
            )
            return gx, (g * xhat).sum(axis=0), g.sum(axis=0)

        del t
        return _apply(out, (x, gain, offset), bwd)

    if mode == "infer":
        if not state.initialized:
            raise StateError("batch_norm_1d in infer mode requires populated running stats")
        inv = 1.0 / np.sqrt(state.var + eps)
        xhat = (xd - state.mean) * inv
        out = xhat * gd + bd

        def bwd(g):
            return g * gd * inv, (g * xhat).sum(axis=0), g.sum(axis=0)

        return _apply(out, (x, gain, offset), bwd)

    raise ConfigError(f"unknown batch_norm mode {mode!r}")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _apply(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    s = _sigmoid(x.data)
    return _apply(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _apply(t, (x,), lambda g: (g * (1.0 - t * t),))


def swish(x: Tensor) -> Tensor:
    """x * sigmoid(x)."""
    s = _sigmoid(x.data)
    out = x.data * s
    grad_factor = s + out * (1.0 - s)
    return _apply(out, (x,), lambda g: (g * grad_factor,))


def glu(x: Tensor) -> Tensor:
    """Gated linear unit over the last axis: first half gated by sigmoid(second half)."""
    n = x.shape[-1]
    if n % 2 != 0:
        raise DimensionError(f"glu requires an even last extent, got {n}")
    h = n // 2
    a = x.data[..., :h]
    s = _sigmoid(x.data[..., h:])
    out = a * s

    def bwd(g):
        gx = np.empty_like(x.data)
        gx[..., :h] = g * s
        gx[..., h:] = g * a * s * (1.0 - s)
        return (gx,)

    return _apply(out, (x,), bwd)


_ACTIVATIONS = {"swish": swish, "relu": relu, "glu": glu, "tanh": tanh, "sigmoid": sigmoid}


def activation(x: Tensor, kind: str) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ConfigError(f"unknown activation kind {kind!r}") from None
    return fn(x)


def softmax_lastdim(x: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Numerically stable softmax over the last axis.

    mask, when given, is boolean and broadcastable to x; masked-out entries
    are exactly zero in the output. A row with no valid entry is an error.
    """
    xd = x.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), xd.shape)
        if not mask.any(axis=-1).all():
            raise MaskError("softmax mask leaves at least one fully-masked row")
        z = np.where(mask, xd, -np.inf)
        m = z.max(axis=-1, keepdims=True)
        e = np.exp(z - m)
        e = np.where(mask, e, 0.0)
    else:
        m = xd.max(axis=-1, keepdims=True)
        e = np.exp(xd - m)
    y = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - dot),)

    return _apply(y, (x,), bwd)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with an explicit generator; callers skip it in infer mode."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    factor = keep * scale
    return _apply(x.data * factor, (x,), lambda g: (g * factor,))
