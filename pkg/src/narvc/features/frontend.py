"""Spectral front end: STFT, log-mel features, frame energy.

Frame grid convention: analysis windows are centered on sample n*hop after
reflective padding, giving floor(len/hop)+1 frames. The mel filterbank uses
the HTK mel scale (2595*log10(1+f/700)) with 80 unnormalized triangles
spanning 0..12 kHz, applied to the power spectrum; log is natural with a
1e-10 floor.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, InputError, StateError
from .audio import AudioClip

__all__ = [
    "FeatureSequence",
    "StftConfig",
    "stft",
    "mel_filterbank",
    "mel_spectrogram",
    "extract_energy",
    "apply_reduction",
    "invert_reduction",
    "num_frames",
]

MEL_FLOOR = 1e-10


@dataclass
class StftConfig:
    sample_rate: int = 24000
    n_fft: int = 2048
    hop: int = 300
    win_length: int = 1200
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 12000.0


@dataclass
class FeatureSequence:
    """Time-major acoustic feature matrix with frame-rate bookkeeping."""

    frames: np.ndarray  # (T, D) float64
    frame_shift: int
    kind: str  # mel | stacked_mel | hidden
    reduction: int = 1
    normalized: bool = False
    orig_len: int | None = None  # unreduced frame count, recorded by stacking

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise InputError("FeatureSequence frames must be a non-empty (T, D) matrix")
        if self.reduction < 1:
            raise InputError("reduction must be >= 1")

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def copy(self) -> "FeatureSequence":
        return replace(self, frames=self.frames.copy())


def num_frames(n_samples: int, hop: int) -> int:
    return n_samples // hop + 1


def reflect_pad(x: np.ndarray, pad: int) -> np.ndarray:
    """Reflect padding that tolerates signals shorter than the pad width."""
    if pad == 0:
        return x
    n = x.size
    if n == 1:
        return np.full(n + 2 * pad, x[0], dtype=np.float64)
    idx = np.arange(-pad, n + pad)
    period = 2 * (n - 1)
    idx = np.abs(np.mod(idx, period))
    idx = np.where(idx >= n, period - idx, idx)
    return x[idx]


def _window(cfg: StftConfig) -> np.ndarray:
    if cfg.win_length > cfg.n_fft:
        raise ConfigError("win_length must not exceed n_fft")
    win = np.hanning(cfg.win_length)
    pad = cfg.n_fft - cfg.win_length
    left = pad // 2
    return np.concatenate([np.zeros(left), win, np.zeros(pad - left)])


def frame_signal(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """(T, n_fft) windowed frames centered at multiples of the hop."""
    pad = cfg.n_fft // 2
    xp = reflect_pad(np.asarray(x, dtype=np.float64), pad)
    t = num_frames(x.size, cfg.hop)
    idx = np.arange(cfg.n_fft)[None, :] + cfg.hop * np.arange(t)[:, None]
    return xp[idx] * _window(cfg)


def stft(clip: AudioClip, cfg: StftConfig | None = None) -> np.ndarray:
    """Complex spectrogram (T, n_fft//2+1)."""
    cfg = cfg or StftConfig()
    if clip.samples.size < 1:
        raise InputError("cannot run stft on an empty clip")
    frames = frame_signal(clip.samples, cfg)
    return np.fft.rfft(frames, n=cfg.n_fft, axis=1)


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: StftConfig) -> np.ndarray:
    """(n_mels, n_fft//2+1) triangular filters on the HTK mel scale."""
    n_bins = cfg.n_fft // 2 + 1
    freqs = np.linspace(0.0, cfg.sample_rate / 2.0, n_bins)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(cfg.fmin), _hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    fb = np.zeros((cfg.n_mels, n_bins))
    for m in range(cfg.n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (freqs - lo) / max(center - lo, 1e-12)
        down = (hi - freqs) / max(hi - center, 1e-12)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def mel_spectrogram(
    clip: AudioClip,
    cfg: StftConfig | None = None,
    allow_other_rate: bool = False,
) -> FeatureSequence:
    """Natural-log mel energies of the power spectrum, floored at 1e-10."""
    cfg = cfg or StftConfig()
    if clip.sample_rate != cfg.sample_rate:
        if not allow_other_rate:
            raise ConfigError(
                f"clip rate {clip.sample_rate} != configured {cfg.sample_rate}; "
                "pass allow_other_rate to regenerate the filterbank"
            )
        cfg = replace(
            cfg,
            sample_rate=clip.sample_rate,
            fmax=min(cfg.fmax, clip.sample_rate / 2.0),
        )
    power = np.abs(stft(clip, cfg)) ** 2
    mel = power @ mel_filterbank(cfg).T
    frames = np.log(np.maximum(mel, MEL_FLOOR))
    return FeatureSequence(frames, cfg.hop, kind="mel")


def extract_energy(clip: AudioClip, cfg: StftConfig | None = None):
    """Per-frame L2 norm of the STFT magnitude; always-voiced prosody track."""
    from .stats import ProsodyTrack  # local import to avoid a cycle

    cfg = cfg or StftConfig()
    mag = np.abs(stft(clip, cfg))
    values = np.sqrt((mag * mag).sum(axis=1))
    return ProsodyTrack(values=values, kind="energy", voicing=np.ones(values.size, dtype=bool))


def apply_reduction(seq: FeatureSequence, r: int) -> FeatureSequence:
    """Concatenate r consecutive frames into one; the last group is zero-padded."""
    if seq.reduction != 1:
        raise StateError("sequence is already stacked")
    if r < 1:
        raise ConfigError("reduction factor must be >= 1")
    if r == 1:
        out = seq.copy()
        out.orig_len = seq.length
        return out
    t, d = seq.frames.shape
    t2 = -(-t // r)
    padded = np.zeros((t2 * r, d))
    padded[:t] = seq.frames
    frames = padded.reshape(t2, r * d)
    return FeatureSequence(
        frames,
        seq.frame_shift * r,
        kind="stacked_mel" if seq.kind == "mel" else seq.kind,
        reduction=r,
        normalized=seq.normalized,
        orig_len=t,
    )


def invert_reduction(seq: FeatureSequence, orig_len: int | None = None) -> FeatureSequence:
    """Invert apply_reduction, truncating to the recorded unreduced length."""
    r = seq.reduction
    if r == 1:
        return seq.copy()
    t2, dr = seq.frames.shape
    if dr % r != 0:
        raise StateError("stacked dimension is not divisible by the reduction factor")
    d = dr // r
    frames = seq.frames.reshape(t2 * r, d)
    n = orig_len if orig_len is not None else seq.orig_len
    if n is None:
        n = t2 * r
    if not 0 < n <= t2 * r:
        raise InputError("invalid original length for unstacking")
    return FeatureSequence(
        frames[:n],
        seq.frame_shift // r,
        kind="mel" if seq.kind == "stacked_mel" else seq.kind,
        reduction=1,
        normalized=seq.normalized,
        orig_len=None,
    )
