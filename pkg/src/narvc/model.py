"""The full conversion network: source encoder, duration predictor, length
regulator, pitch/energy variance converters, and the target decoder with its
refinement stack; plus teacher-forced training losses, the inference path,
and checkpoint I/O.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field, fields

import numpy as np

from .conformer import (
    BlockConfig,
    ConformerBlock,
    RunContext,
    xavier_uniform,
)
from .errors import ConfigError, DimensionError, InputError, NarvcError, StateError
from .features import (
    FeatureSequence,
    ProsodyTrack,
    SpeakerStats,
    apply_reduction,
    denormalize,
    invert_reduction,
    normalize,
    reduce_track,
)
from .numerics import (
    Tensor,
    conv1d,
    layer_norm,
    linear,
    relu,
    stop_gradient,
    tabs,
    tanh,
    tsum,
    square,
    index_rows,
)
from .numerics.tensor import add, mul
from .numerics.serialize import load_container, save_container

__all__ = [
    "ModelConfig",
    "VcPair",
    "VcBatch",
    "LossReport",
    "VoiceConversionModel",
    "length_regulate",
    "durations_from_log",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass
class ModelConfig:
    mel_dim: int = 80
    reduction: int = 3
    enc_blocks: int = 4
    dec_blocks: int = 4
    dim: int = 384
    heads: int = 2
    ff_expansion: int = 4
    conv_kernel: int = 7
    block_mode: str = "conformer"
    dropout: float = 0.1
    predictor_channels: int = 256
    dur_layers: int = 2
    dur_kernel: int = 3
    energy_layers: int = 2
    energy_kernel: int = 3
    pitch_layers: int = 5
    pitch_kernel: int = 5
    embed_kernel: int = 1
    postnet_layers: int = 5
    postnet_channels: int = 512
    postnet_kernel: int = 5
    use_variance_converters: bool = True
    supervise_before_postnet: bool = True
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type == "int" and f.name != "seed" and v <= 0:
                raise ConfigError(f"{f.name} must be positive, got {v}")
        for k in ("conv_kernel", "dur_kernel", "energy_kernel", "pitch_kernel",
                  "embed_kernel", "postnet_kernel"):
            if getattr(self, k) % 2 == 0:
                raise ConfigError(f"{k} must be odd, got {getattr(self, k)}")
        if self.block_mode not in ("conformer", "transformer"):
            raise ConfigError(f"unknown block_mode {self.block_mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")

    @property
    def stacked_dim(self) -> int:
        return self.mel_dim * self.reduction

    def block_config(self) -> BlockConfig:
        return BlockConfig(
            dim=self.dim,
            heads=self.heads,
            ff_expansion=self.ff_expansion,
            conv_kernel=self.conv_kernel,
            dropout=self.dropout,
            mode=self.block_mode,
        )

    def to_meta(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name}={getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_meta(cls, meta: str) -> "ModelConfig":
        kw = {}
        known = {f.name: f for f in fields(cls)}
        for line in meta.strip().splitlines():
            if "=" not in line:
                continue
            k, v = line.split("=", 1)
            if k not in known:
                continue
            ftype = known[k].type
            if ftype == "int":
                kw[k] = int(v)
            elif ftype == "float":
                kw[k] = float(v)
            elif ftype == "bool":
                kw[k] = v == "True"
            else:
                kw[k] = v
        return cls(**kw)


@dataclass
class VcPair:
    """One parallel training example on the reduced, normalized grids.

    Arrays may be padded beyond the true lengths; ``src_len``/``tgt_len``
    record how many leading frames are real.
    """

    utt_id: str
    src_mel: np.ndarray  # (>=src_len, mel_dim*r)
    tgt_mel: np.ndarray  # (>=tgt_len, mel_dim*r)
    durations: np.ndarray  # (>=src_len,) ints on the reduced grid
    src_pitch: np.ndarray
    src_energy: np.ndarray
    tgt_pitch: np.ndarray
    tgt_energy: np.ndarray
    src_len: int = 0
    tgt_len: int = 0

    def __post_init__(self):
        if self.src_len == 0:
            self.src_len = int(np.asarray(self.src_mel).shape[0])
        if self.tgt_len == 0:
            self.tgt_len = int(np.asarray(self.tgt_mel).shape[0])

    def validate(self, cfg: ModelConfig) -> None:
        d = np.asarray(self.durations[: self.src_len])
        if d.size != self.src_len:
            raise InputError(f"{self.utt_id}: durations shorter than src_len")
        if (d < 0).any():
            raise InputError(f"{self.utt_id}: negative durations")
        if int(d.sum()) != self.tgt_len:
            raise InputError(
                f"{self.utt_id}: durations sum to {int(d.sum())}, target length is {self.tgt_len}"
            )
        for name in ("src_mel", "tgt_mel", "src_pitch", "src_energy", "tgt_pitch", "tgt_energy"):
            arr = np.asarray(getattr(self, name))
            need = self.src_len if name.startswith("src") else self.tgt_len
            if arr.shape[0] < need:
                raise InputError(f"{self.utt_id}: {name} shorter than its true length")
        if self.src_mel.shape[1] != cfg.stacked_dim or self.tgt_mel.shape[1] != cfg.stacked_dim:
            raise InputError(f"{self.utt_id}: mel width != {cfg.stacked_dim}")


@dataclass
class VcBatch:
    items: list[VcPair]

    def validate(self, cfg: ModelConfig) -> None:
        if not self.items:
            raise InputError("empty batch")
        for item in self.items:
            item.validate(cfg)


@dataclass
class LossReport:
    mel_l1_before: float
    mel_l1_after: float
    dur_mse_log: float
    pitch_mse: float
    energy_mse: float
    total: float
    total_tensor: Tensor | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict[str, float]:
        return {
            "mel_l1_before": self.mel_l1_before,
            "mel_l1_after": self.mel_l1_after,
            "dur_mse_log": self.dur_mse_log,
            "pitch_mse": self.pitch_mse,
            "energy_mse": self.energy_mse,
            "total": self.total,
        }


@contextmanager
def _stage(tag: str):
    try:
        yield
    except NarvcError as e:
        raise type(e)(f"[{tag}] {e}") from e


def length_regulate(hidden: Tensor, durations: np.ndarray) -> Tensor:
    """Repeat frame i durations[i] times, preserving order."""
    durations = np.asarray(durations, dtype=np.int64)
    if durations.ndim != 1 or durations.shape[0] != hidden.shape[0]:
        raise DimensionError(
            f"durations {durations.shape} do not match {hidden.shape[0]} frames"
        )
    if (durations < 0).any():
        raise InputError("durations must be non-negative")
    total = int(durations.sum())
    if total < 1:
        raise InputError("durations sum to zero; nothing to regulate")
    idx = np.repeat(np.arange(durations.size), durations)
    return index_rows(hidden, idx)


def regulate_values(values: np.ndarray, durations: np.ndarray) -> np.ndarray:
    return np.repeat(np.asarray(values), np.asarray(durations, dtype=np.int64), axis=0)


def durations_from_log(log_dur: np.ndarray) -> np.ndarray:
    """Invert log-domain duration predictions to integer frame counts.

    The training target for a duration d is ln(d+1), so the inverse is
    round(exp(x) - 1) (ties to even), floored at 0. If everything rounds to
    zero the highest-scoring frame is promoted to 1 so the output is usable.
    """
    d = np.round(np.exp(np.asarray(log_dur, dtype=np.float64)) - 1.0)
    d = np.maximum(d, 0.0).astype(np.int64)
    if d.sum() == 0:
        d[int(np.argmax(log_dur))] = 1
    return d


class ConvPredictor:
    """Stack of (conv1d -> ReLU -> LayerNorm -> dropout) layers plus a scalar
    head; the shared shape of the duration predictor and both converters."""

    def __init__(self, in_dim: int, channels: int, layers: int, kernel: int,
                 rng: np.random.Generator):
        self.layers = []
        for i in range(layers):
            cin = in_dim if i == 0 else channels
            w = xavier_uniform(rng, (kernel, cin, channels), kernel * cin, kernel * channels)
            b = Tensor(np.zeros(channels), requires_grad=True)
            g = Tensor(np.ones(channels), requires_grad=True)
            o = Tensor(np.zeros(channels), requires_grad=True)
            self.layers.append((w, b, g, o))
        self.out_w = xavier_uniform(rng, (channels, 1), channels, 1)
        self.out_b = Tensor(np.zeros(1), requires_grad=True)

    def __call__(self, x: Tensor, ctx: RunContext) -> Tensor:
        h = x
        for w, b, g, o in self.layers:
            h = conv1d(h, w, b)
            h = relu(h)
            h = layer_norm(h, g, o)
            h = ctx.drop(h)
        out = linear(h, self.out_w, self.out_b)  # (T, 1)
        return out.reshape((x.shape[0],))

    def named_params(self, prefix: str):
        for i, (w, b, g, o) in enumerate(self.layers):
            yield f"{prefix}.layer{i}.conv.w", w
            yield f"{prefix}.layer{i}.conv.b", b
            yield f"{prefix}.layer{i}.ln.g", g
            yield f"{prefix}.layer{i}.ln.b", o
        yield f"{prefix}.out.w", self.out_w
        yield f"{prefix}.out.b", self.out_b


class TrackEmbed:
    """1-D convolution lifting a scalar track to the attention dimension."""

    def __init__(self, dim: int, kernel: int, rng: np.random.Generator):
        self.w = xavier_uniform(rng, (kernel, 1, dim), kernel, kernel * dim)
        self.b = Tensor(np.zeros(dim), requires_grad=True)

    def __call__(self, track: Tensor) -> Tensor:
        return conv1d(track.reshape((track.shape[0], 1)), self.w, self.b)

    def named_params(self, prefix: str):
        yield f"{prefix}.w", self.w
        yield f"{prefix}.b", self.b


class Postnet:
    """Residual refinement: postnet_layers convolutions at postnet_channels,
    tanh on all but the last, added back onto the first-pass output."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        k, ch, out = cfg.postnet_kernel, cfg.postnet_channels, cfg.stacked_dim
        self.convs = []
        for i in range(cfg.postnet_layers):
            cin = out if i == 0 else ch
            cout = out if i == cfg.postnet_layers - 1 else ch
            w = xavier_uniform(rng, (k, cin, cout), k * cin, k * cout)
            b = Tensor(np.zeros(cout), requires_grad=True)
            self.convs.append((w, b))

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        for i, (w, b) in enumerate(self.convs):
            h = conv1d(h, w, b)
            if i < len(self.convs) - 1:
                h = tanh(h)
        return h

    def named_params(self, prefix: str):
        for i, (w, b) in enumerate(self.convs):
            yield f"{prefix}.layer{i}.w", w
            yield f"{prefix}.layer{i}.b", b


class VoiceConversionModel:
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng([config.seed, 0])
        c = config
        bc = c.block_config()
        self.in_w = xavier_uniform(rng, (c.stacked_dim, c.dim), c.stacked_dim, c.dim)
        self.in_b = Tensor(np.zeros(c.dim), requires_grad=True)
        self.enc_blocks = [ConformerBlock(bc, rng) for _ in range(c.enc_blocks)]
        self.duration = ConvPredictor(c.dim, c.predictor_channels, c.dur_layers,
                                      c.dur_kernel, rng)
        if c.use_variance_converters:
            self.pitch_embed_src = TrackEmbed(c.dim, c.embed_kernel, rng)
            self.energy_embed_src = TrackEmbed(c.dim, c.embed_kernel, rng)
            self.pitch_conv = ConvPredictor(c.dim, c.predictor_channels, c.pitch_layers,
                                            c.pitch_kernel, rng)
            self.energy_conv = ConvPredictor(c.dim, c.predictor_channels, c.energy_layers,
                                             c.energy_kernel, rng)
            self.pitch_embed_tgt = TrackEmbed(c.dim, c.embed_kernel, rng)
            self.energy_embed_tgt = TrackEmbed(c.dim, c.embed_kernel, rng)
        self.dec_blocks = [ConformerBlock(bc, rng) for _ in range(c.dec_blocks)]
        self.out_w = xavier_uniform(rng, (c.dim, c.stacked_dim), c.dim, c.stacked_dim)
        self.out_b = Tensor(np.zeros(c.stacked_dim), requires_grad=True)
        self.postnet = Postnet(c, rng)

    # ------------------------------------------------------------------ #
    # parameter enumeration
    # ------------------------------------------------------------------ #

    def named_params(self):
        yield "in_proj.w", self.in_w
        yield "in_proj.b", self.in_b
        for i, b in enumerate(self.enc_blocks):
            yield from b.named_params(f"enc.block{i}")
        yield from self.duration.named_params("dur")
        if self.config.use_variance_converters:
            yield from self.pitch_embed_src.named_params("pitchconv.embed")
            yield from self.pitch_conv.named_params("pitchconv")
            yield from self.energy_embed_src.named_params("energyconv.embed")
            yield from self.energy_conv.named_params("energyconv")
            yield from self.pitch_embed_tgt.named_params("dec.pitch_embed")
            yield from self.energy_embed_tgt.named_params("dec.energy_embed")
        for i, b in enumerate(self.dec_blocks):
            yield from b.named_params(f"dec.block{i}")
        yield "dec.out.w", self.out_w
        yield "dec.out.b", self.out_b
        yield from self.postnet.named_params("postnet")

    def named_states(self):
        for i, b in enumerate(self.enc_blocks):
            yield from b.named_states(f"enc.block{i}")
        for i, b in enumerate(self.dec_blocks):
            yield from b.named_states(f"dec.block{i}")

    def encoder_param_names(self) -> set[str]:
        names = {"in_proj.w", "in_proj.b"}
        for i, b in enumerate(self.enc_blocks):
            names.update(n for n, _ in b.named_params(f"enc.block{i}"))
        return names

    def zero_grad(self) -> None:
        for _, p in self.named_params():
            p.grad = None

    def param_count(self) -> int:
        return sum(p.size for _, p in self.named_params())

    # ------------------------------------------------------------------ #
    # forward pieces
    # ------------------------------------------------------------------ #

    def _ctx(self, mode: str, rng: np.random.Generator | None = None) -> RunContext:
        return RunContext(mode, rng, self.config.dropout)

    def encode_source(self, src_mel, ctx: RunContext, mask: np.ndarray | None = None) -> Tensor:
        """Stacked+normalized source mel (T', mel_dim*r) -> hidden (T', dim)."""
        if isinstance(src_mel, FeatureSequence):
            if src_mel.reduction != self.config.reduction:
                raise StateError(
                    f"encoder expects reduction {self.config.reduction}, got {src_mel.reduction}"
                )
            if not src_mel.normalized:
                raise StateError("encoder expects normalized input")
            src_mel = Tensor(src_mel.frames)
        if src_mel.shape[1] != self.config.stacked_dim:
            raise DimensionError(
                f"encoder input width {src_mel.shape[1]} != {self.config.stacked_dim}"
            )
        h = linear(src_mel, self.in_w, self.in_b)
        for block in self.enc_blocks:
            h = block(h, ctx, mask)
        return h

    def predict_duration(self, hidden: Tensor, ctx: RunContext) -> Tensor:
        """Log-domain duration predictions per source frame."""
        return self.duration(hidden, ctx)

    def variance_convert(self, kind: str, hidden_reg: Tensor, track_reg: Tensor,
                         ctx: RunContext) -> Tensor:
        """Convert a length-regulated, normalized source track to the target
        speaker's normalized track. The pitch branch stops gradients into the
        encoder; the energy branch does not."""
        if not self.config.use_variance_converters:
            raise StateError("variance converters are disabled in this configuration")
        if track_reg.shape[0] != hidden_reg.shape[0]:
            raise DimensionError(
                f"track length {track_reg.shape[0]} != hidden length {hidden_reg.shape[0]}"
            )
        if kind == "pitch":
            base = stop_gradient(hidden_reg)
            net, embed = self.pitch_conv, self.pitch_embed_src
        elif kind == "energy":
            base = hidden_reg
            net, embed = self.energy_conv, self.energy_embed_src
        else:
            raise ConfigError(f"unknown variance kind {kind!r}")
        return net(add(base, embed(track_reg)), ctx)

    def decode_target(self, hidden_reg: Tensor, pitch: Tensor | None,
                      energy: Tensor | None, ctx: RunContext,
                      mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
        """Returns (first-pass mel, refined mel), both (T_tgt', mel_dim*r)."""
        h = hidden_reg
        if self.config.use_variance_converters:
            if pitch is None or energy is None:
                raise InputError("decoder needs pitch and energy tracks when converters are on")
            if pitch.shape[0] != h.shape[0] or energy.shape[0] != h.shape[0]:
                raise DimensionError("pitch/energy grids do not match the decoder input")
            h = add(h, self.pitch_embed_tgt(pitch))
            h = add(h, self.energy_embed_tgt(energy))
        for block in self.dec_blocks:
            h = block(h, ctx, mask)
        before = linear(h, self.out_w, self.out_b)
        after = add(before, self.postnet(before))
        return before, after

    # ------------------------------------------------------------------ #
    # training forward
    # ------------------------------------------------------------------ #

    def forward_train(self, batch: VcBatch, mode: str = "train",
                      rng: np.random.Generator | None = None,
                      loss_mask: dict | None = None) -> LossReport:
        """Teacher-forced losses over a batch. ``loss_mask`` can zero out
        components (keys: mel, dur, pitch, energy) for wiring tests."""
        batch.validate(self.config)
        ctx = self._ctx(mode, rng)
        enabled = {"mel": True, "dur": True, "pitch": True, "energy": True}
        if loss_mask:
            enabled.update(loss_mask)

        zero = Tensor(np.zeros(()))
        sums = {k: zero for k in ("before", "after", "dur", "pitch", "energy")}
        counts = {k: 0 for k in sums}

        for item in batch.items:
            sl, tl = item.src_len, item.tgt_len
            src_mel = Tensor(np.asarray(item.src_mel)[:sl])
            tgt_mel = np.asarray(item.tgt_mel)[:tl]
            durations = np.asarray(item.durations)[:sl].astype(np.int64)

            hidden = self.encode_source(src_mel, ctx)

            if enabled["dur"]:
                log_dur = self.predict_duration(hidden, ctx)
                target = np.log(durations + 1.0)
                diff = add(log_dur, Tensor(-target))
                sums["dur"] = add(sums["dur"], tsum(square(diff)))
                counts["dur"] += sl

            hidden_reg = length_regulate(hidden, durations)

            if self.config.use_variance_converters and (enabled["pitch"] or enabled["energy"]):
                if enabled["pitch"]:
                    track = Tensor(regulate_values(np.asarray(item.src_pitch)[:sl], durations))
                    pred = self.variance_convert("pitch", hidden_reg, track, ctx)
                    diff = add(pred, Tensor(-np.asarray(item.tgt_pitch)[:tl]))
                    sums["pitch"] = add(sums["pitch"], tsum(square(diff)))
                    counts["pitch"] += tl
                if enabled["energy"]:
                    track = Tensor(regulate_values(np.asarray(item.src_energy)[:sl], durations))
                    pred = self.variance_convert("energy", hidden_reg, track, ctx)
                    diff = add(pred, Tensor(-np.asarray(item.tgt_energy)[:tl]))
                    sums["energy"] = add(sums["energy"], tsum(square(diff)))
                    counts["energy"] += tl

            if enabled["mel"]:
                pitch_in = energy_in = None
                if self.config.use_variance_converters:
                    pitch_in = Tensor(np.asarray(item.tgt_pitch)[:tl])
                    energy_in = Tensor(np.asarray(item.tgt_energy)[:tl])
                before, after = self.decode_target(hidden_reg, pitch_in, energy_in, ctx)
                tgt = Tensor(tgt_mel)
                sums["before"] = add(sums["before"], tsum(tabs(add(before, mul(tgt, -1.0)))))
                sums["after"] = add(sums["after"], tsum(tabs(add(after, mul(tgt, -1.0)))))
                counts["before"] += tl * self.config.stacked_dim
                counts["after"] += tl * self.config.stacked_dim

        def mean_of(key):
            return mul(sums[key], 1.0 / counts[key]) if counts[key] else zero

        l_before = mean_of("before")
        l_after = mean_of("after")
        l_dur = mean_of("dur")
        l_pitch = mean_of("pitch")
        l_energy = mean_of("energy")

        total = add(l_after, add(l_dur, add(l_pitch, l_energy)))
        if self.config.supervise_before_postnet:
            total = add(total, l_before)
        before_val = l_before.item() if self.config.supervise_before_postnet else 0.0

        return LossReport(
            mel_l1_before=before_val,
            mel_l1_after=l_after.item(),
            dur_mse_log=l_dur.item(),
            pitch_mse=l_pitch.item(),
            energy_mse=l_energy.item(),
            total=before_val + l_after.item() + l_dur.item() + l_pitch.item() + l_energy.item(),
            total_tensor=total,
        )

    # ------------------------------------------------------------------ #
    # inference
    # ------------------------------------------------------------------ #

    def convert(self, mel: FeatureSequence, pitch: ProsodyTrack, energy: ProsodyTrack,
                src_stats: SpeakerStats, tgt_stats: SpeakerStats) -> FeatureSequence:
        """Raw (unnormalized, unstacked) source features -> raw converted mel."""
        r = self.config.reduction
        ctx = self._ctx("infer")
        with _stage("normalize"):
            if mel.normalized or pitch.normalized or energy.normalized:
                raise StateError("convert expects raw, unnormalized inputs")
            if mel.reduction != 1:
                raise StateError("convert expects unstacked input")
            mel_n = apply_reduction(normalize(mel, src_stats), r)
            pitch_n = reduce_track(normalize(pitch, src_stats), r)
            energy_n = reduce_track(normalize(energy, src_stats), r)
        with _stage("encode"):
            hidden = self.encode_source(mel_n, ctx)
        with _stage("duration"):
            log_dur = self.predict_duration(hidden, ctx)
            durations = durations_from_log(log_dur.data)
        with _stage("regulate"):
            hidden_reg = length_regulate(hidden, durations)
            pitch_reg = Tensor(regulate_values(pitch_n.values, durations))
            energy_reg = Tensor(regulate_values(energy_n.values, durations))
        pitch_out = energy_out = None
        if self.config.use_variance_converters:
            with _stage("variance"):
                pitch_out = self.variance_convert("pitch", hidden_reg, pitch_reg, ctx)
                energy_out = self.variance_convert("energy", hidden_reg, energy_reg, ctx)
        with _stage("decode"):
            _, after = self.decode_target(hidden_reg, pitch_out, energy_out, ctx)
        with _stage("unstack"):
            total = int(durations.sum())
            out = FeatureSequence(
                after.data,
                frame_shift=mel.frame_shift * r,
                kind="stacked_mel",
                reduction=r,
                normalized=True,
                orig_len=total * r,
            )
            out = invert_reduction(out)
            return denormalize(out, tgt_stats)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, model: VoiceConversionModel, extra_meta: str = "") -> None:
    tensors: dict[str, np.ndarray] = {}
    for name, p in model.named_params():
        tensors[name] = p.data
    for name, st in model.named_states():
        tensors[f"{name}.mean"] = st.mean
        tensors[f"{name}.var"] = st.var
        tensors[f"{name}.init"] = np.array([1.0 if st.initialized else 0.0])
    meta = model.config.to_meta()
    if extra_meta:
        meta += extra_meta if extra_meta.endswith("\n") else extra_meta + "\n"
    save_container(path, tensors, meta=meta, dtype="f8")


def load_checkpoint(path) -> VoiceConversionModel:
    tensors, meta = load_container(path)
    config = ModelConfig.from_meta(meta)
    model = VoiceConversionModel(config)
    consumed = set()
    for name, p in model.named_params():
        if name not in tensors:
            raise InputError(f"checkpoint {path} is missing parameter {name}")
        arr = tensors[name]
        if arr.shape != p.data.shape:
            raise InputError(
                f"checkpoint {path}: {name} has shape {arr.shape}, config wants {p.data.shape}"
            )
        p.data[...] = arr
        consumed.add(name)
    for name, st in model.named_states():
        for suffix in (".mean", ".var", ".init"):
            if name + suffix not in tensors:
                raise InputError(f"checkpoint {path} is missing state {name}{suffix}")
        st.mean = tensors[f"{name}.mean"].copy()
        st.var = tensors[f"{name}.var"].copy()
        st.initialized = bool(tensors[f"{name}.init"][0] > 0.5)
        consumed.update({name + s for s in (".mean", ".var", ".init")})
    extra = set(tensors) - consumed
    if extra:
        raise InputError(f"checkpoint {path} holds unknown tensors: {sorted(extra)[:5]}")
    return model


def checkpoint_meta(path) -> str:
    _, meta = load_container(path)
    return meta
