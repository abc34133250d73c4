"""Per-speaker normalization statistics and prosody tracks."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import InputError, StateError
from ..numerics import load_container, save_container
from .frontend import FeatureSequence

__all__ = [
    "ProsodyTrack",
    "SpeakerStats",
    "compute_speaker_stats",
    "normalize",
    "denormalize",
    "reduce_track",
    "save_stats",
    "load_stats",
]

STD_FLOOR = 1e-8


@dataclass
class ProsodyTrack:
    """Per-frame continuous log-pitch or energy with its voicing mask."""

    values: np.ndarray  # (T,)
    kind: str  # log_pitch | energy
    voicing: np.ndarray  # (T,) bool; all-true for energy
    normalized: bool = False
    reduction: int = 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.voicing = np.asarray(self.voicing, dtype=bool)
        if self.values.ndim != 1 or self.values.size < 1:
            raise InputError("ProsodyTrack values must be a non-empty vector")
        if self.voicing.shape != self.values.shape:
            raise InputError("voicing mask must match values")
        if not np.all(np.isfinite(self.values)):
            raise InputError("ProsodyTrack values must be finite everywhere")

    @property
    def length(self) -> int:
        return self.values.size

    def copy(self) -> "ProsodyTrack":
        return replace(self, values=self.values.copy(), voicing=self.voicing.copy())


@dataclass
class SpeakerStats:
    """Mean/std of mel, pitch, and energy over one speaker's training split.

    Pitch statistics are computed over the continuous (gap-filled) track, so
    normalization stays a single affine map. All stds are floored at 1e-8.
    """

    mel_mean: np.ndarray
    mel_std: np.ndarray
    pitch_mean: float
    pitch_std: float
    energy_mean: float
    energy_std: float
    speaker_id: str = ""
    num_frames: int = 0


def compute_speaker_stats(
    utterances: list[tuple[FeatureSequence, ProsodyTrack, ProsodyTrack]],
    speaker_id: str = "",
) -> SpeakerStats:
    """Population statistics over all frames of all (mel, pitch, energy) triples."""
    if not utterances:
        raise InputError("cannot compute speaker stats from an empty set")
    mels, pitches, energies = [], [], []
    for mel, pitch, energy in utterances:
        if mel.reduction != 1:
            raise InputError("speaker stats require unstacked (reduction 1) features")
        if mel.normalized or pitch.normalized or energy.normalized:
            raise InputError("speaker stats require unnormalized inputs")
        if pitch.kind != "log_pitch" or energy.kind != "energy":
            raise InputError("expected (mel, log_pitch, energy) triples")
        mels.append(mel.frames)
        pitches.append(pitch.values)
        energies.append(energy.values)
    mel_all = np.concatenate(mels, axis=0)
    pitch_all = np.concatenate(pitches)
    energy_all = np.concatenate(energies)
    if mel_all.shape[0] < 2:
        raise InputError("speaker stats need at least two frames")
    return SpeakerStats(
        mel_mean=mel_all.mean(axis=0),
        mel_std=np.maximum(mel_all.std(axis=0), STD_FLOOR),
        pitch_mean=float(pitch_all.mean()),
        pitch_std=float(max(pitch_all.std(), STD_FLOOR)),
        energy_mean=float(energy_all.mean()),
        energy_std=float(max(energy_all.std(), STD_FLOOR)),
        speaker_id=speaker_id,
        num_frames=int(mel_all.shape[0]),
    )


def _mel_affine(stats: SpeakerStats, reduction: int) -> tuple[np.ndarray, np.ndarray]:
    mean = np.tile(stats.mel_mean, reduction)
    std = np.tile(stats.mel_std, reduction)
    return mean, std


def _track_affine(stats: SpeakerStats, kind: str) -> tuple[float, float]:
    if kind == "log_pitch":
        return stats.pitch_mean, stats.pitch_std
    if kind == "energy":
        return stats.energy_mean, stats.energy_std
    raise InputError(f"no statistics for track kind {kind!r}")


def normalize(seq, stats: SpeakerStats):
    """(x - mean) / std; flips the normalized flag."""
    if seq.normalized:
        raise StateError("sequence is already normalized")
    out = seq.copy()
    if isinstance(seq, FeatureSequence):
        mean, std = _mel_affine(stats, seq.reduction)
        out.frames = (seq.frames - mean) / std
    elif isinstance(seq, ProsodyTrack):
        mean, std = _track_affine(stats, seq.kind)
        out.values = (seq.values - mean) / std
    else:
        raise InputError(f"cannot normalize {type(seq).__name__}")
    out.normalized = True
    return out


def denormalize(seq, stats: SpeakerStats):
    """Inverse of normalize; round-trips within 1e-10."""
    if not seq.normalized:
        raise StateError("sequence is not normalized")
    out = seq.copy()
    if isinstance(seq, FeatureSequence):
        mean, std = _mel_affine(stats, seq.reduction)
        out.frames = seq.frames * std + mean
    elif isinstance(seq, ProsodyTrack):
        mean, std = _track_affine(stats, seq.kind)
        out.values = seq.values * std + mean
    else:
        raise InputError(f"cannot denormalize {type(seq).__name__}")
    out.normalized = False
    return out


def reduce_track(track: ProsodyTrack, r: int) -> ProsodyTrack:
    """Average groups of r frames so the track lives on the reduced grid.

    A group is voiced when at least half of its (unpadded) frames are voiced.
    The final partial group averages only real frames.
    """
    if track.reduction != 1:
        raise StateError("track is already reduced")
    if r < 1:
        raise InputError("reduction factor must be >= 1")
    if r == 1:
        return track.copy()
    t = track.length
    t2 = -(-t // r)
    values = np.zeros(t2)
    voicing = np.zeros(t2, dtype=bool)
    for g in range(t2):
        chunk = track.values[g * r : (g + 1) * r]
        vchunk = track.voicing[g * r : (g + 1) * r]
        values[g] = chunk.mean()
        voicing[g] = vchunk.sum() * 2 >= vchunk.size
    return ProsodyTrack(
        values=values,
        kind=track.kind,
        voicing=voicing,
        normalized=track.normalized,
        reduction=r,
    )


_STATS_KEYS = ("mel_mean", "mel_std", "pitch_mean", "pitch_std", "energy_mean", "energy_std")


def save_stats(path, stats: SpeakerStats) -> None:
    tensors = {
        "mel_mean": stats.mel_mean,
        "mel_std": stats.mel_std,
        "pitch_mean": np.array([stats.pitch_mean]),
        "pitch_std": np.array([stats.pitch_std]),
        "energy_mean": np.array([stats.energy_mean]),
        "energy_std": np.array([stats.energy_std]),
    }
    meta = f"speaker_id={stats.speaker_id}\nnum_frames={stats.num_frames}\n"
    save_container(path, tensors, meta=meta)


def load_stats(path) -> SpeakerStats:
    tensors, meta = load_container(path)
    missing = [k for k in _STATS_KEYS if k not in tensors]
    if missing:
        raise InputError(f"stats file {path} is missing tensors: {missing}")
    fields = dict(
        line.split("=", 1) for line in meta.strip().splitlines() if "=" in line
    )
    return SpeakerStats(
        mel_mean=tensors["mel_mean"],
        mel_std=tensors["mel_std"],
        pitch_mean=float(tensors["pitch_mean"][0]),
        pitch_std=float(tensors["pitch_std"][0]),
        energy_mean=float(tensors["energy_mean"][0]),
        energy_std=float(tensors["energy_std"][0]),
        speaker_id=fields.get("speaker_id", ""),
        num_frames=int(fields.get("num_frames", "0")),
    )
