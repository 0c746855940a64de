import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from sed_forge.audio import AudioClip
from sed_forge.errors import ConfigError, ShapeError
from sed_forge.features import (
    LOG_FLOOR,
    FeatureConfig,
    FeatureMatrix,
    NormStats,
    build_mel_filterbank,
    compute_norm_stats,
    denormalize,
    extract_features,
    load_feature_cache,
    log_mel,
    normalize,
    save_feature_cache,
    split_sequences,
    stft_magnitude,
)


def _clip(seconds=1.0, rate=16000, seed=0):
    rng = np.random.default_rng(seed)
    return AudioClip(samples=rng.uniform(-0.5, 0.5, int(seconds * rate)), sample_rate=rate)


def test_one_second_gives_49_frames_at_both_rates():
    for rate in (16000, 44100):
        clip = _clip(1.0, rate)
        feats = extract_features(clip, FeatureConfig(sample_rate=rate))
        assert feats.values.shape == (40, 49)
        assert feats.frame_hop_seconds == pytest.approx(0.02)


def test_trailing_partial_frame_dropped():
    rate = 16000
    config = FeatureConfig(sample_rate=rate)
    base = extract_features(_clip(1.0, rate), config)
    # 319 extra samples are less than one hop: frame count unchanged
    longer = AudioClip(samples=np.concatenate([_clip(1.0, rate).samples, np.zeros(319)]),
                       sample_rate=rate)
    assert extract_features(longer, config).num_frames == base.num_frames


def test_stft_matches_naive_dft():
    # small frame keeps the O(n^2) oracle affordable
    rate, frame_seconds = 2000, 0.032
    clip = _clip(0.2, rate, seed=5)
    mags = stft_magnitude(clip, frame_seconds, 0.5)
    n = int(round(frame_seconds * rate))
    window = np.hamming(n)
    for frame_index in (0, 3):
        start = frame_index * (n // 2)
        expected = oracles.naive_dft_magnitude(clip.samples[start : start + n] * window)
        assert np.allclose(mags[:, frame_index], expected, rtol=1e-9, atol=1e-9)


def test_dft_length_equals_frame_length():
    rate = 16000
    clip = _clip(0.5, rate)
    mags = stft_magnitude(clip, 0.04, 0.5)
    assert mags.shape[0] == 640 // 2 + 1


def test_filterbank_shape_and_coverage():
    bank = build_mel_filterbank(40, 16000, 640)
    assert bank.weights.shape == (40, 321)
    assert np.all(bank.weights >= 0)
    assert np.all(bank.weights.sum(axis=1) > 0)
    mel = 2595.0 * np.log10(1.0 + bank.band_edges_hz / 700.0)
    spacing = np.diff(mel)
    assert np.allclose(spacing, spacing[0], rtol=1e-9)
    assert bank.band_edges_hz[0] == 0.0
    assert bank.band_edges_hz[-1] == pytest.approx(8000.0)


def test_filterbank_rejects_tiny_fft():
    with pytest.raises(ConfigError):
        build_mel_filterbank(40, 16000, 1)


def test_log_mel_composition_and_floor():
    rate = 16000
    clip = _clip(0.5, rate, seed=2)
    config = FeatureConfig(sample_rate=rate)
    bank = build_mel_filterbank(40, rate, 640)
    feats = log_mel(clip, bank, 0.04, 0.5)
    mags = stft_magnitude(clip, 0.04, 0.5)
    expected = np.log(bank.weights @ mags ** 2 + LOG_FLOOR)
    assert np.array_equal(feats.values, expected)
    silent = AudioClip(samples=np.zeros(8000), sample_rate=rate)
    silent_feats = extract_features(silent, config)
    assert np.all(silent_feats.values == math.log(LOG_FLOOR))


def test_doubling_amplitude_adds_log4():
    rate = 16000
    clip = _clip(0.5, rate, seed=9)
    config = FeatureConfig(sample_rate=rate)
    quiet = extract_features(clip, config)
    loud = extract_features(AudioClip(samples=2.0 * clip.samples, sample_rate=rate), config)
    unfloored = quiet.values > math.log(1e-6)
    shift = loud.values[unfloored] - quiet.values[unfloored]
    assert np.allclose(shift, math.log(4.0), atol=1e-6)


def test_norm_stats_identity_and_floor():
    flat = FeatureMatrix(values=np.ones((3, 10)), frame_hop_seconds=0.02)
    stats = compute_norm_stats([flat])
    assert np.all(stats.std == 1e-5)
    assert len(stats.identity()) == 12
    other = NormStats(mean=np.zeros(3), std=np.ones(3))
    assert stats.identity() != other.identity()
    normalized = normalize(flat, stats)
    assert np.all(np.isfinite(normalized.values))
    assert normalized.normalized


def test_norm_stats_are_per_band_over_all_frames():
    rng = np.random.default_rng(7)
    mats = [FeatureMatrix(values=rng.standard_normal((4, n)), frame_hop_seconds=0.02)
            for n in (13, 31)]
    stats = compute_norm_stats(mats)
    joined = np.concatenate([m.values for m in mats], axis=1)
    assert np.allclose(stats.mean, joined.mean(axis=1))
    assert np.allclose(stats.std, joined.std(axis=1))
    z = np.concatenate([normalize(m, stats).values for m in mats], axis=1)
    assert np.allclose(z.mean(axis=1), 0.0, atol=1e-12)
    assert np.allclose(z.std(axis=1), 1.0, atol=1e-9)


@given(st.integers(0, 2 ** 31).map(lambda s: np.random.default_rng(s)))
def test_normalize_roundtrip(rng):
    values = rng.standard_normal((5, 17)) * rng.uniform(0.1, 10.0)
    feats = FeatureMatrix(values=values, frame_hop_seconds=0.02)
    stats = compute_norm_stats([feats])
    back = denormalize(normalize(feats, stats), stats)
    assert not back.normalized
    assert np.allclose(back.values, values, atol=1e-9)


def test_normalize_band_mismatch_rejected():
    feats = FeatureMatrix(values=np.zeros((4, 5)), frame_hop_seconds=0.02)
    with pytest.raises(ShapeError):
        normalize(feats, NormStats(mean=np.zeros(3), std=np.ones(3)))


def test_eval_windows_tile_without_offset():
    feats = FeatureMatrix(values=np.arange(2 * 300.0).reshape(2, 300),
                          frame_hop_seconds=0.02)
    windows = split_sequences(feats, length_frames=128)
    assert [w.start_frame for w in windows] == [0, 128, 256]
    rebuilt = np.concatenate([w.features[:, w.mask] for w in windows], axis=1)
    assert np.array_equal(rebuilt, feats.values)
    assert windows[-1].mask.sum() == 300 - 256
    assert np.all(windows[-1].features[:, windows[-1].mask.sum():] == 0)


@given(st.integers(0, 400))
def test_train_windows_rotate_by_epoch(epoch):
    feats = FeatureMatrix(values=np.zeros((1, 500)), frame_hop_seconds=0.02)
    windows = split_sequences(feats, length_frames=128, train_mode=True, epoch_index=epoch)
    expected_offset = (epoch * 73) % 128
    assert windows[0].start_frame == expected_offset
    assert all(b.start_frame - a.start_frame == 128 for a, b in zip(windows, windows[1:]))


def test_window_offsets_cycle_through_many_phases():
    offsets = {(epoch * 73) % 128 for epoch in range(128)}
    # 73 and 128 share no factor, so every phase occurs
    assert len(offsets) == 128


def test_window_targets_follow_roll():
    feats = FeatureMatrix(values=np.zeros((1, 10)), frame_hop_seconds=0.02)
    targets = np.zeros((2, 10), dtype=np.uint8)
    targets[0, 3:7] = 1
    windows = split_sequences(feats, targets=targets, length_frames=4)
    stitched = np.concatenate([w.targets[:, w.mask] for w in windows], axis=1)
    assert np.array_equal(stitched, targets)


def test_feature_cache_roundtrip(tmp_path):
    feats = extract_features(_clip(0.3), FeatureConfig(sample_rate=16000))
    path = tmp_path / "rec.sff"
    save_feature_cache(path, feats, stats_id="raw", extra_meta={"rec_id": "r1"})
    loaded, meta = load_feature_cache(path)
    assert meta["rec_id"] == "r1"
    assert loaded.frame_hop_seconds == feats.frame_hop_seconds
    assert loaded.normalized == feats.normalized
    assert np.array_equal(loaded.values, feats.values.astype(np.float32))
