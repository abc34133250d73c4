"""Audio ingestion and the acoustic front end."""
from .audio import AudioClip, read_wav, write_wav
from .frontend import (
    FeatureSequence,
    StftConfig,
    apply_reduction,
    extract_energy,
    invert_reduction,
    mel_filterbank,
    mel_spectrogram,
    num_frames,
    stft,
)
from .pitch import PitchConfig, extract_pitch
from .stats import (
    ProsodyTrack,
    SpeakerStats,
    compute_speaker_stats,
    denormalize,
    load_stats,
    normalize,
    reduce_track,
    save_stats,
)

__all__ = [
    "AudioClip",
    "read_wav",
    "write_wav",
    "FeatureSequence",
    "StftConfig",
    "stft",
    "mel_filterbank",
    "mel_spectrogram",
    "extract_energy",
    "extract_pitch",
    "PitchConfig",
    "apply_reduction",
    "invert_reduction",
    "num_frames",
    "ProsodyTrack",
    "SpeakerStats",
    "compute_speaker_stats",
    "normalize",
    "denormalize",
    "reduce_track",
    "save_stats",
    "load_stats",
]
