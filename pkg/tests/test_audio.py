import numpy as np
import pytest

from sed_forge.audio import AudioClip, read_wav, resample_linear, write_wav
from sed_forge.errors import ConfigError


def test_wav_roundtrip_is_float32_exact(tmp_path):
    rng = np.random.default_rng(3)
    samples = rng.uniform(-0.8, 0.8, size=1600)
    clip = AudioClip(samples=samples, sample_rate=16000)
    path = tmp_path / "clip.wav"
    write_wav(path, clip)
    back = read_wav(path)
    assert back.sample_rate == 16000
    assert np.array_equal(back.samples, samples.astype(np.float32).astype(np.float64))


def test_duration():
    clip = AudioClip(samples=np.zeros(8000), sample_rate=16000)
    assert clip.duration_seconds == pytest.approx(0.5)


def test_resample_identity():
    x = np.random.default_rng(0).standard_normal(100)
    assert np.array_equal(resample_linear(x, 16000, 16000), x)


def test_resample_preserves_slow_ramp():
    # a linear ramp is reproduced exactly by linear interpolation
    x = np.linspace(0.0, 1.0, 101)
    y = resample_linear(x, 100, 50)
    t_y = np.arange(y.size) / 50.0
    assert np.allclose(y, np.interp(t_y, np.arange(x.size) / 100.0, x), atol=1e-12)


def test_read_wav_with_target_rate(tmp_path):
    t = np.arange(3200) / 32000.0
    clip = AudioClip(samples=np.sin(2 * np.pi * 220.0 * t), sample_rate=32000)
    path = tmp_path / "clip.wav"
    write_wav(path, clip)
    down = read_wav(path, target_rate=16000)
    assert down.sample_rate == 16000
    assert abs(down.duration_seconds - clip.duration_seconds) < 1e-3
    # the downsampled sinusoid still correlates strongly with the ideal one
    ref = np.sin(2 * np.pi * 220.0 * np.arange(down.samples.size) / 16000.0)
    corr = np.corrcoef(down.samples, ref)[0, 1]
    assert corr > 0.99


def test_bad_sample_rate_rejected():
    with pytest.raises(ConfigError):
        AudioClip(samples=np.zeros(10), sample_rate=0)
