"""Conformer blocks with relative-position multi-head self-attention.

Blocks are pre-norm macaron style: half-step feed-forward, attention,
convolution module (pointwise conv + GLU + depthwise conv + batch norm),
second half-step feed-forward, then a final LayerNorm. A ``transformer``
mode reroutes the same parameters as attention followed by one full-weight
ReLU feed-forward, for ablation runs; convolution-module parameters exist
in both modes but are unused in transformer mode.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .numerics import (
    BatchNormState,
    Tensor,
    batch_norm_1d,
    conv1d,
    depthwise_conv1d,
    dropout,
    glu,
    layer_norm,
    linear,
    matmul,
    relu,
    reshape,
    softmax_lastdim,
    swish,
    transpose,
)
from .numerics.tensor import _apply, add, mul

__all__ = [
    "BlockConfig",
    "RunContext",
    "FeedForwardModule",
    "RelativeMHSA",
    "ConvolutionModule",
    "ConformerBlock",
    "relative_positional_encoding",
    "xavier_uniform",
]


@dataclass
class BlockConfig:
    dim: int = 384
    heads: int = 2
    ff_expansion: int = 4
    conv_kernel: int = 7
    dropout: float = 0.1
    mode: str = "conformer"  # conformer | transformer

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.conv_kernel % 2 == 0:
            raise ConfigError(f"conv_kernel must be odd, got {self.conv_kernel}")
        if self.ff_expansion < 1:
            raise ConfigError("ff_expansion must be >= 1")
        if self.mode not in ("conformer", "transformer"):
            raise ConfigError(f"unknown block mode {self.mode!r}")


class RunContext:
    """Per-call execution mode: train/infer plus the dropout generator."""

    def __init__(self, mode: str = "infer", rng: np.random.Generator | None = None,
                 dropout_rate: float = 0.0):
        if mode not in ("train", "infer"):
            raise ConfigError(f"unknown mode {mode!r}")
        if mode == "train" and dropout_rate > 0.0 and rng is None:
            raise ConfigError("train mode with dropout needs an rng")
        self.mode = mode
        self.rng = rng
        self.dropout_rate = dropout_rate

    def drop(self, x: Tensor) -> Tensor:
        if self.mode == "train" and self.dropout_rate > 0.0:
            return dropout(x, self.dropout_rate, self.rng)
        return x


def xavier_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, shape), requires_grad=True)


def _zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def _ones_param(shape) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True)


def relative_positional_encoding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal embeddings for relative offsets t-1 .. -(t-1), shape (2t-1, dim).

    Row k encodes offset (t-1-k); even columns are sines, odd columns cosines,
    with wavelengths 10000^(2i/dim).
    """
    if t < 1:
        raise DimensionError("need t >= 1")
    offsets = np.arange(t - 1, -t, -1, dtype=np.float64)
    i = np.arange(0, dim, 2, dtype=np.float64)
    inv = 1.0 / np.power(10000.0, i / dim)
    angles = offsets[:, None] * inv[None, :]
    enc = np.zeros((2 * t - 1, dim))
    enc[:, 0::2] = np.sin(angles)
    enc[:, 1::2] = np.cos(angles[:, : dim // 2])
    return enc


def _relative_gather(scores: Tensor, t: int) -> Tensor:
    """(H, T, 2T-1) per-offset scores -> (H, T, T) per-pair scores.

    Entry [h, i, j] reads offset i-j, stored at column (t-1) - (i-j).
    """
    h = scores.shape[0]
    rows = np.arange(t)
    cols = (t - 1) - rows[:, None] + rows[None, :]
    hidx = np.arange(h)[:, None, None]
    ridx = rows[None, :, None]
    out = scores.data[hidx, ridx, cols[None]]
    shape = scores.data.shape

    def bwd(g):
        gs = np.zeros(shape)
        np.add.at(gs, (hidx, ridx, cols[None]), g)
        return (gs,)

    return _apply(out, (scores,), bwd)


class FeedForwardModule:
    """LayerNorm -> linear(dim -> e*dim) -> activation -> dropout ->
    linear(e*dim -> dim) -> dropout, scaled by ``scale``. Residual is the
    caller's job."""

    def __init__(self, cfg: BlockConfig, rng: np.random.Generator):
        d, e = cfg.dim, cfg.ff_expansion
        self.ln_g = _ones_param(d)
        self.ln_b = _zeros_param(d)
        self.w1 = xavier_uniform(rng, (d, e * d), d, e * d)
        self.b1 = _zeros_param(e * d)
        self.w2 = xavier_uniform(rng, (e * d, d), e * d, d)
        self.b2 = _zeros_param(d)

    def __call__(self, x: Tensor, ctx: RunContext, scale: float = 0.5,
                 act: str = "swish") -> Tensor:
        h = layer_norm(x, self.ln_g, self.ln_b)
        h = linear(h, self.w1, self.b1)
        h = swish(h) if act == "swish" else relu(h)
        h = ctx.drop(h)
        h = linear(h, self.w2, self.b2)
        h = ctx.drop(h)
        return mul(h, scale) if scale != 1.0 else h

    def named_params(self, prefix: str):
        yield f"{prefix}.ln.g", self.ln_g
        yield f"{prefix}.ln.b", self.ln_b
        yield f"{prefix}.lin1.w", self.w1
        yield f"{prefix}.lin1.b", self.b1
        yield f"{prefix}.lin2.w", self.w2
        yield f"{prefix}.lin2.b", self.b2


class RelativeMHSA:
    """Pre-norm multi-head self-attention with relative positional scores.

    score(i, j) = (q_i + u) . k_j + (q_i + v) . r_{i-j}, scaled by
    head_dim^-0.5; u and v are learned per-head bias vectors and r comes
    from the sinusoidal relative encoding through a learned projection.
    """

    def __init__(self, cfg: BlockConfig, rng: np.random.Generator):
        d, h = cfg.dim, cfg.heads
        self.dim, self.heads, self.head_dim = d, h, d // h
        self.ln_g = _ones_param(d)
        self.ln_b = _zeros_param(d)
        self.q_w = xavier_uniform(rng, (d, d), d, d)
        self.q_b = _zeros_param(d)
        self.k_w = xavier_uniform(rng, (d, d), d, d)
        self.k_b = _zeros_param(d)
        self.v_w = xavier_uniform(rng, (d, d), d, d)
        self.v_b = _zeros_param(d)
        self.o_w = xavier_uniform(rng, (d, d), d, d)
        self.o_b = _zeros_param(d)
        self.pos_w = xavier_uniform(rng, (d, d), d, d)
        self.u = _zeros_param((h, 1, d // h))
        self.v = _zeros_param((h, 1, d // h))
        self.last_attention: np.ndarray | None = None

    def _split_heads(self, x: Tensor, t: int) -> Tensor:
        return transpose(reshape(x, (t, self.heads, self.head_dim)), (1, 0, 2))

    def __call__(self, x: Tensor, ctx: RunContext, mask: np.ndarray | None = None) -> Tensor:
        t = x.shape[0]
        h = layer_norm(x, self.ln_g, self.ln_b)
        q = self._split_heads(linear(h, self.q_w, self.q_b), t)  # (H,T,dh)
        k = self._split_heads(linear(h, self.k_w, self.k_b), t)
        v = self._split_heads(linear(h, self.v_w, self.v_b), t)

        pe = Tensor(relative_positional_encoding(t, self.dim))
        r = self._split_heads_static(matmul(pe, self.pos_w), 2 * t - 1)  # (H,2T-1,dh)

        content = matmul(add(q, self.u), transpose(k, (0, 2, 1)))  # (H,T,T)
        pos_full = matmul(add(q, self.v), transpose(r, (0, 2, 1)))  # (H,T,2T-1)
        pos = _relative_gather(pos_full, t)
        scores = mul(add(content, pos), self.head_dim ** -0.5)

        key_mask = None
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (t,):
                raise DimensionError(f"attention mask must be ({t},), got {mask.shape}")
            key_mask = np.broadcast_to(mask[None, None, :], (self.heads, t, t))
        attn = softmax_lastdim(scores, key_mask)
        self.last_attention = attn.data.copy()
        out = matmul(attn, v)  # (H,T,dh)
        out = reshape(transpose(out, (1, 0, 2)), (t, self.dim))
        out = linear(out, self.o_w, self.o_b)
        return ctx.drop(out)

    def _split_heads_static(self, x: Tensor, rows: int) -> Tensor:
        return transpose(reshape(x, (rows, self.heads, self.head_dim)), (1, 0, 2))

    def named_params(self, prefix: str):
        yield f"{prefix}.ln.g", self.ln_g
        yield f"{prefix}.ln.b", self.ln_b
        for name in ("q", "k", "v", "o"):
            yield f"{prefix}.{name}_w", getattr(self, f"{name}_w")
            yield f"{prefix}.{name}_b", getattr(self, f"{name}_b")
        yield f"{prefix}.pos_w", self.pos_w
        yield f"{prefix}.u", self.u
        yield f"{prefix}.v", self.v


class ConvolutionModule:
    """LayerNorm -> pointwise conv (dim -> 2 dim) -> GLU -> depthwise conv ->
    batch norm -> Swish -> pointwise conv (dim -> dim) -> dropout."""

    def __init__(self, cfg: BlockConfig, rng: np.random.Generator):
        d, k = cfg.dim, cfg.conv_kernel
        self.ln_g = _ones_param(d)
        self.ln_b = _zeros_param(d)
        self.pw1_w = xavier_uniform(rng, (1, d, 2 * d), d, 2 * d)
        self.pw1_b = _zeros_param(2 * d)
        self.dw_w = xavier_uniform(rng, (k, d), k, k)
        self.dw_b = _zeros_param(d)
        self.bn_g = _ones_param(d)
        self.bn_b = _zeros_param(d)
        # start at mean 0 / var 1 so untrained blocks are usable in infer mode
        self.bn_state = BatchNormState(d)
        self.bn_state.initialized = True
        self.pw2_w = xavier_uniform(rng, (1, d, d), d, d)
        self.pw2_b = _zeros_param(d)

    def __call__(self, x: Tensor, ctx: RunContext) -> Tensor:
        h = layer_norm(x, self.ln_g, self.ln_b)
        h = conv1d(h, self.pw1_w, self.pw1_b)
        h = glu(h)
        h = add(depthwise_conv1d(h, self.dw_w), self.dw_b)
        h = batch_norm_1d(h, self.bn_g, self.bn_b, self.bn_state, ctx.mode)
        h = swish(h)
        h = conv1d(h, self.pw2_w, self.pw2_b)
        return ctx.drop(h)

    def named_params(self, prefix: str):
        yield f"{prefix}.ln.g", self.ln_g
        yield f"{prefix}.ln.b", self.ln_b
        yield f"{prefix}.pw1.w", self.pw1_w
        yield f"{prefix}.pw1.b", self.pw1_b
        yield f"{prefix}.dw.w", self.dw_w
        yield f"{prefix}.dw.b", self.dw_b
        yield f"{prefix}.bn.g", self.bn_g
        yield f"{prefix}.bn.b", self.bn_b
        yield f"{prefix}.pw2.w", self.pw2_w
        yield f"{prefix}.pw2.b", self.pw2_b

    def named_states(self, prefix: str):
        yield f"{prefix}.bn", self.bn_state


class ConformerBlock:
    """One block; length-polymorphic over T and residual at every stage."""

    def __init__(self, cfg: BlockConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.ffm1 = FeedForwardModule(cfg, rng)
        self.mhsa = RelativeMHSA(cfg, rng)
        self.conv = ConvolutionModule(cfg, rng)
        self.ffm2 = FeedForwardModule(cfg, rng)
        self.final_g = _ones_param(cfg.dim)
        self.final_b = _zeros_param(cfg.dim)

    def __call__(self, x: Tensor, ctx: RunContext, mask: np.ndarray | None = None) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.cfg.dim:
            raise DimensionError(f"block expects (T, {self.cfg.dim}), got {x.shape}")
        if self.cfg.mode == "transformer":
            x = add(x, self.mhsa(x, ctx, mask))
            x = add(x, self.ffm2(x, ctx, scale=1.0, act="relu"))
            return layer_norm(x, self.final_g, self.final_b)
        x = add(x, self.ffm1(x, ctx))
        x = add(x, self.mhsa(x, ctx, mask))
        x = add(x, self.conv(x, ctx))
        x = add(x, self.ffm2(x, ctx))
        return layer_norm(x, self.final_g, self.final_b)

    def named_params(self, prefix: str):
        yield from self.ffm1.named_params(f"{prefix}.ffm1")
        yield from self.mhsa.named_params(f"{prefix}.mhsa")
        yield from self.conv.named_params(f"{prefix}.conv")
        yield from self.ffm2.named_params(f"{prefix}.ffm2")
        yield f"{prefix}.final_ln.g", self.final_g
        yield f"{prefix}.final_ln.b", self.final_b

    def named_states(self, prefix: str):
        yield from self.conv.named_states(f"{prefix}.conv")
