"""Shared builders for model-level tests."""
import numpy as np
import pytest

from narvc.model import ModelConfig, VcBatch, VcPair


def tiny_model_config(**kw):
    base = dict(
        mel_dim=4,
        reduction=3,
        enc_blocks=1,
        dec_blocks=1,
        dim=8,
        heads=2,
        ff_expansion=2,
        conv_kernel=3,
        dropout=0.0,
        predictor_channels=6,
        dur_layers=1,
        dur_kernel=3,
        energy_layers=1,
        energy_kernel=3,
        pitch_layers=2,
        pitch_kernel=3,
        postnet_layers=2,
        postnet_channels=6,
        postnet_kernel=3,
        seed=0,
    )
    base.update(kw)
    return ModelConfig(**base)


def random_durations(rng, src_len, total=None):
    d = rng.integers(0, 4, size=src_len)
    if d.sum() == 0:
        d[rng.integers(0, src_len)] = 1
    if total is not None:
        while d.sum() > total:
            i = rng.integers(0, src_len)
            if d[i] > 0:
                d[i] -= 1
        while d.sum() < total:
            d[rng.integers(0, src_len)] += 1
    return d.astype(np.int64)


def make_pair(cfg, rng, src_len=5, durations=None, utt_id="utt0", pad=0):
    if durations is None:
        durations = random_durations(rng, src_len)
    durations = np.asarray(durations, dtype=np.int64)
    tgt_len = int(durations.sum())
    d = cfg.stacked_dim

    def padded(arr, n_extra):
        if n_extra == 0:
            return arr
        pad_shape = (n_extra,) + arr.shape[1:]
        return np.concatenate([arr, np.zeros(pad_shape)], axis=0)

    return VcPair(
        utt_id=utt_id,
        src_mel=padded(rng.standard_normal((src_len, d)), pad),
        tgt_mel=padded(rng.standard_normal((tgt_len, d)), pad),
        durations=padded(durations.astype(np.float64), pad).astype(np.int64),
        src_pitch=padded(rng.standard_normal(src_len), pad),
        src_energy=padded(rng.standard_normal(src_len), pad),
        tgt_pitch=padded(rng.standard_normal(tgt_len), pad),
        tgt_energy=padded(rng.standard_normal(tgt_len), pad),
        src_len=src_len,
        tgt_len=tgt_len,
    )


def make_batch(cfg, rng, n=2, **kw):
    return VcBatch([make_pair(cfg, rng, utt_id=f"utt{i}", **kw) for i in range(n)])


@pytest.fixture
def tiny_cfg_fixture():
    return tiny_model_config()
