"""WAV input/output and elementary waveform handling.

All audio inside the package is mono float64 in [-1, 1]. Files are accepted
at any rate; callers that need a fixed rate resample on load.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import ConfigError, EmptyInputError, ShapeError


@dataclass(frozen=True)
class AudioClip:
    """A mono waveform with its sample rate."""

    samples: np.ndarray  # shape (n,), float in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1:
            raise ShapeError(f"samples must be 1-D, got shape {self.samples.shape}")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_seconds(self) -> float:
        return self.num_samples / self.sample_rate


def resample_linear(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    """Resample by linear interpolation onto the destination sample grid."""
    if src_rate == dst_rate:
        return samples
    if samples.size == 0:
        raise EmptyInputError("cannot resample an empty signal")
    num_out = int(round(samples.size * dst_rate / src_rate))
    num_out = max(num_out, 1)
    # positions of output samples expressed on the source index axis
    positions = np.arange(num_out, dtype=np.float64) * (src_rate / dst_rate)
    return np.interp(positions, np.arange(samples.size, dtype=np.float64), samples)


def read_wav(path: str | Path, target_rate: int | None = None) -> AudioClip:
    """Load a WAV file as a mono float clip, resampling if a target rate is given.

    Integer PCM is scaled to [-1, 1]; stereo is averaged down to mono.
    """
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise SedForgeError(f"cannot read WAV file {path}: {exc}") from exc
    if data.size == 0:
        raise EmptyInputError(f"WAV file {path} holds no samples")
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise SedForgeError(f"unsupported WAV sample format {data.dtype} in {path}")
    if target_rate is not None and rate != target_rate:
        samples = resample_linear(samples, rate, target_rate)
        rate = target_rate
    return AudioClip(samples=samples, sample_rate=int(rate))


def write_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as 32-bit float WAV."""
    wavfile.write(str(path), clip.sample_rate, clip.samples.astype(np.float32))
