"""Audio clips and 16-bit PCM mono WAV I/O."""
from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from ..errors import InputError

__all__ = ["AudioClip", "read_wav", "write_wav"]


@dataclass
class AudioClip:
    """Mono audio, float64 samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InputError("AudioClip requires a non-empty 1-D sample array")
        if self.sample_rate <= 0:
            raise InputError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise InputError("AudioClip samples must be finite")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def scaled(self, factor: float) -> "AudioClip":
        return AudioClip(self.samples * factor, self.sample_rate, self.id)


def read_wav(path, utt_id: str = "") -> AudioClip:
    """Read a RIFF/PCM16 mono WAV file; anything else is rejected."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1:
                raise InputError(f"{path}: only mono WAV is supported")
            if wf.getsampwidth() != 2:
                raise InputError(f"{path}: only 16-bit PCM WAV is supported")
            if wf.getcomptype() != "NONE":
                raise InputError(f"{path}: compressed WAV is not supported")
            sr = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as e:
        raise InputError(f"{path}: not a readable WAV file ({e})") from e
    except FileNotFoundError as e:
        raise InputError(f"no such file: {path}") from e
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if data.size == 0:
        raise InputError(f"{path}: empty WAV file")
    return AudioClip(data, sr, utt_id or str(path))


def write_wav(path, clip: AudioClip) -> None:
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(pcm.tobytes())
