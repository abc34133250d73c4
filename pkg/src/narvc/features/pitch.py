"""Continuous log-pitch extraction.

Per-frame F0 by normalized autocorrelation over a 60-500 Hz search band with
parabolic peak refinement; frames whose best normalized peak falls below 0.3
are unvoiced. Unvoiced gaps are filled by linear interpolation of log-F0 with
edge values held, so the returned track is finite everywhere. The frame grid
matches the mel front end (hop 300, floor(len/hop)+1 frames).
"""
from __future__ import annotations

import numpy as np

from ..errors import InputError
from .audio import AudioClip
from .frontend import StftConfig, num_frames, reflect_pad

__all__ = ["PitchConfig", "extract_pitch"]

VOICING_THRESHOLD = 0.3
# among near-maximal autocorrelation peaks, prefer the shortest lag (highest
# F0 candidate) to avoid locking onto period multiples
PEAK_RATIO = 0.9


class PitchConfig:
    def __init__(self, sample_rate=24000, hop=300, win_length=1200, fmin=60.0, fmax=500.0):
        self.sample_rate = sample_rate
        self.hop = hop
        self.win_length = win_length
        self.fmin = fmin
        self.fmax = fmax


def _frame_nacf(frame: np.ndarray, lag_min: int, lag_max: int) -> np.ndarray:
    """Normalized autocorrelation r(tau) for tau in [lag_min, lag_max]."""
    w = frame.size
    n_fft = 1
    while n_fft < 2 * w:
        n_fft *= 2
    spec = np.fft.rfft(frame, n_fft)
    ac = np.fft.irfft(spec * np.conj(spec), n_fft)[: lag_max + 1]
    sq = frame * frame
    csum = np.concatenate([[0.0], np.cumsum(sq)])
    taus = np.arange(lag_min, lag_max + 1)
    e_head = csum[w - taus] - csum[0]  # energy of x[0 .. w-tau-1]
    e_tail = csum[w] - csum[taus]  # energy of x[tau .. w-1]
    denom = np.sqrt(e_head * e_tail) + 1e-12
    return ac[lag_min : lag_max + 1] / denom


def _refine_peak(r: np.ndarray, i: int) -> tuple[float, float]:
    """Parabolic interpolation around index i; returns (offset, value)."""
    if i <= 0 or i >= r.size - 1:
        return 0.0, r[i]
    a, b, c = r[i - 1], r[i], r[i + 1]
    denom = a - 2.0 * b + c
    if abs(denom) < 1e-12:
        return 0.0, b
    delta = 0.5 * (a - c) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    value = b - 0.25 * (a - c) * delta
    return delta, value


def extract_pitch(clip: AudioClip, cfg: PitchConfig | None = None):
    """Continuous log-F0 prosody track on the mel frame grid."""
    from .stats import ProsodyTrack

    cfg = cfg or PitchConfig()
    x = clip.samples
    if x.size < cfg.win_length:
        raise InputError(
            f"clip of {x.size} samples is shorter than one pitch analysis window ({cfg.win_length})"
        )
    sr = cfg.sample_rate if clip.sample_rate == cfg.sample_rate else clip.sample_rate
    lag_min = max(2, int(sr / cfg.fmax))
    lag_max = int(np.ceil(sr / cfg.fmin))
    w = cfg.win_length
    t = num_frames(x.size, cfg.hop)
    pad = w // 2
    xp = reflect_pad(x, pad)

    f0 = np.zeros(t)
    voicing = np.zeros(t, dtype=bool)
    for n in range(t):
        frame = xp[n * cfg.hop : n * cfg.hop + w]
        frame = frame - frame.mean()
        if np.max(np.abs(frame)) < 1e-9:
            continue
        r = _frame_nacf(frame, lag_min, lag_max)
        best = float(r.max())
        if best < VOICING_THRESHOLD:
            continue
        # local maxima close to the global best, shortest lag first
        interior = np.zeros(r.size, dtype=bool)
        interior[1:-1] = (r[1:-1] >= r[:-2]) & (r[1:-1] >= r[2:])
        candidates = np.flatnonzero(interior & (r >= PEAK_RATIO * best))
        i = int(candidates[0]) if candidates.size else int(np.argmax(r))
        delta, value = _refine_peak(r, i)
        if value < VOICING_THRESHOLD:
            continue
        lag = lag_min + i + delta
        hz = sr / lag
        if cfg.fmin <= hz <= cfg.fmax:
            f0[n] = hz
            voicing[n] = True

    log_f0 = _fill_continuous(f0, voicing, np.log(cfg.fmin))
    return ProsodyTrack(values=log_f0, kind="log_pitch", voicing=voicing)


def _fill_continuous(f0: np.ndarray, voicing: np.ndarray, fallback: float) -> np.ndarray:
    t = f0.size
    if not voicing.any():
        return np.full(t, fallback)
    xs = np.flatnonzero(voicing)
    ys = np.log(f0[xs])
    # np.interp holds the edge values outside the voiced span
    return np.interp(np.arange(t), xs, ys)


def stft_grid_config(cfg: StftConfig) -> PitchConfig:
    return PitchConfig(sample_rate=cfg.sample_rate, hop=cfg.hop, win_length=cfg.win_length)
