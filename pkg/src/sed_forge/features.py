"""Log-mel feature extraction: framing, mel filterbank, normalization, windowing."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .audio import AudioClip
from .container import read_container, write_container
from .errors import ConfigError, EmptyInputError, ShapeError

# floor added inside the log so silent bands stay finite
LOG_FLOOR = 1e-10
# per-band standard deviations below this are clamped before dividing
STD_FLOOR = 1e-5
# training windows start at (epoch * stride) mod length; 73 shares no factor
# with the usual power-of-two sequence lengths, so offsets cycle through many
# distinct values across epochs
SEQUENCE_OFFSET_STRIDE = 73


@dataclass(frozen=True)
class FeatureConfig:
    """Settings of the feature front-end."""

    sample_rate: int = 44100
    frame_seconds: float = 0.04
    overlap_fraction: float = 0.5
    num_bands: int = 40

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.frame_seconds <= 0:
            raise ConfigError(f"frame_seconds must be positive, got {self.frame_seconds}")
        if not 0 <= self.overlap_fraction < 1:
            raise ConfigError(f"overlap_fraction must lie in [0, 1), got {self.overlap_fraction}")
        if self.num_bands < 1:
            raise ConfigError(f"num_bands must be at least 1, got {self.num_bands}")

    @property
    def frame_length_samples(self) -> int:
        return int(round(self.frame_seconds * self.sample_rate))

    @property
    def hop_samples(self) -> int:
        hop = int(round(self.frame_length_samples * (1.0 - self.overlap_fraction)))
        return max(hop, 1)

    @property
    def hop_seconds(self) -> float:
        return self.hop_samples / self.sample_rate

    def to_meta(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "frame_seconds": self.frame_seconds,
            "overlap_fraction": self.overlap_fraction,
            "num_bands": self.num_bands,
        }

    @classmethod
    def from_meta(cls, meta: dict) -> "FeatureConfig":
        return cls(
            sample_rate=int(meta["sample_rate"]),
            frame_seconds=float(meta["frame_seconds"]),
            overlap_fraction=float(meta["overlap_fraction"]),
            num_bands=int(meta["num_bands"]),
        )


@dataclass(frozen=True)
class FeatureMatrix:
    """Bands-by-frames grid of (log-mel) feature values."""

    values: np.ndarray  # (F, T)
    frame_hop_seconds: float
    normalized: bool = False

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ShapeError(f"feature values must be 2-D, got shape {self.values.shape}")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ShapeError(f"feature matrix must be non-empty, got shape {self.values.shape}")
        if self.frame_hop_seconds <= 0:
            raise ConfigError(f"frame_hop_seconds must be positive, got {self.frame_hop_seconds}")

    @property
    def num_bands(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormStats:
    """Per-band mean and (floored) standard deviation."""

    mean: np.ndarray  # (F,)
    std: np.ndarray  # (F,), strictly positive

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError(
                f"mean/std must be matching 1-D arrays, got {self.mean.shape} and {self.std.shape}"
            )
        if not np.all(self.std > 0):
            raise ConfigError("std values must be strictly positive")

    @property
    def num_bands(self) -> int:
        return self.mean.shape[0]

    def identity(self) -> str:
        """Short content hash used to tag artifacts with the stats they assume."""
        digest = hashlib.sha256()
        digest.update(self.mean.astype("<f8").tobytes())
        digest.update(self.std.astype("<f8").tobytes())
        return digest.hexdigest()[:12]


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular filters mapping DFT bins to mel bands."""

    weights: np.ndarray  # (F, B), all >= 0
    band_edges_hz: np.ndarray  # (F + 2,), 0 .. Nyquist
    sample_rate: int
    fft_size: int

    @property
    def num_bands(self) -> int:
        return self.weights.shape[0]

    @property
    def num_bins(self) -> int:
        return self.weights.shape[1]


def hz_to_mel(freq_hz):
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def _frame_signal(samples: np.ndarray, frame_length: int, hop: int) -> np.ndarray:
    """Slice a signal into (num_frames, frame_length) rows; no edge padding,
    a trailing partial frame is dropped."""
    if samples.size < frame_length:
        raise EmptyInputError(
            f"clip of {samples.size} samples is shorter than one {frame_length}-sample frame"
        )
    windows = np.lib.stride_tricks.sliding_window_view(samples, frame_length)
    return windows[::hop]


def stft_magnitude(clip: AudioClip, frame_seconds: float, overlap_fraction: float) -> np.ndarray:
    """Hamming-windowed STFT magnitudes, shape (bins, frames).

    The DFT length equals the frame length, so bins = frame_length // 2 + 1.
    """
    if frame_seconds <= 0:
        raise ConfigError(f"frame_seconds must be positive, got {frame_seconds}")
    if not 0 <= overlap_fraction < 1:
        raise ConfigError(f"overlap_fraction must lie in [0, 1), got {overlap_fraction}")
    frame_length = int(round(frame_seconds * clip.sample_rate))
    if frame_length < 1:
        raise ConfigError("frame is shorter than one sample at this rate")
    hop = max(int(round(frame_length * (1.0 - overlap_fraction))), 1)
    frames = _frame_signal(np.asarray(clip.samples, dtype=np.float64), frame_length, hop)
    window = np.hamming(frame_length)
    spectrum = np.fft.rfft(frames * window, n=frame_length, axis=1)
    return np.abs(spectrum).T


def build_mel_filterbank(num_bands: int, sample_rate: int, fft_size: int) -> MelFilterbank:
    """Triangular mel filters covering 0 Hz to Nyquist.

    fft_size is the DFT length used by the STFT (any value >= 2 works, it
    does not have to be a power of two)."""
    if num_bands < 1:
        raise ConfigError(f"num_bands must be at least 1, got {num_bands}")
    if fft_size < 2:
        raise ConfigError(f"fft_size must be at least 2, got {fft_size}")
    if sample_rate <= 0:
        raise ConfigError(f"sample_rate must be positive, got {sample_rate}")
    num_bins = fft_size // 2 + 1
    if num_bands > num_bins:
        raise ConfigError(
            f"num_bands={num_bands} exceeds the {num_bins} available spectrum bins"
        )
    nyquist = sample_rate / 2.0
    edges_hz = mel_to_hz(np.linspace(0.0, float(hz_to_mel(nyquist)), num_bands + 2))
    # pin the endpoints exactly; the mel round-trip is only float-accurate
    edges_hz[0] = 0.0
    edges_hz[-1] = nyquist
    bin_freqs = np.arange(num_bins, dtype=np.float64) * sample_rate / fft_size

    weights = np.zeros((num_bands, num_bins), dtype=np.float64)
    for band in range(num_bands):
        left, center, right = edges_hz[band], edges_hz[band + 1], edges_hz[band + 2]
        rising = (bin_freqs - left) / max(center - left, 1e-12)
        falling = (right - bin_freqs) / max(right - center, 1e-12)
        weights[band] = np.maximum(0.0, np.minimum(rising, falling))
        if not np.any(weights[band] > 0):
            raise ConfigError(
                f"mel band {band} captures no spectrum bin; lower num_bands or raise fft_size"
            )
    return MelFilterbank(
        weights=weights, band_edges_hz=edges_hz, sample_rate=sample_rate, fft_size=fft_size
    )


def log_mel(
    clip: AudioClip, bank: MelFilterbank, frame_seconds: float, overlap_fraction: float
) -> FeatureMatrix:
    """Unnormalized log mel-band energies for one clip."""
    magnitudes = stft_magnitude(clip, frame_seconds, overlap_fraction)
    if magnitudes.shape[0] != bank.num_bins:
        raise ShapeError(
            f"filterbank expects {bank.num_bins} bins but the frame length yields "
            f"{magnitudes.shape[0]}; build the bank with fft_size = frame length"
        )
    energies = magnitudes ** 2
    mel_energies = bank.weights @ energies
    values = np.log(mel_energies + LOG_FLOOR)
    frame_length = int(round(frame_seconds * clip.sample_rate))
    hop = max(int(round(frame_length * (1.0 - overlap_fraction))), 1)
    return FeatureMatrix(values=values, frame_hop_seconds=hop / clip.sample_rate)


def extract_features(clip: AudioClip, config: FeatureConfig, bank: MelFilterbank | None = None) -> FeatureMatrix:
    """Full front-end for one clip under a FeatureConfig."""
    if clip.sample_rate != config.sample_rate:
        raise ConfigError(
            f"clip rate {clip.sample_rate} != configured rate {config.sample_rate}; "
            "load audio with the configured target rate"
        )
    if bank is None:
        bank = build_mel_filterbank(config.num_bands, config.sample_rate, config.frame_length_samples)
    return log_mel(clip, bank, config.frame_seconds, config.overlap_fraction)


def compute_norm_stats(training_features: list[FeatureMatrix]) -> NormStats:
    """Per-band mean/std over every frame of every training matrix."""
    if not training_features:
        raise EmptyInputError("cannot compute normalization stats from an empty list")
    num_bands = training_features[0].num_bands
    for fm in training_features:
        if fm.num_bands != num_bands:
            raise ShapeError(f"band count mismatch: {fm.num_bands} != {num_bands}")
    values = np.concatenate([fm.values for fm in training_features], axis=1)
    mean = values.mean(axis=1)
    std = values.std(axis=1)
    return NormStats(mean=mean, std=np.maximum(std, STD_FLOOR))


def normalize(features: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    if features.num_bands != stats.num_bands:
        raise ShapeError(
            f"feature bands {features.num_bands} != stats bands {stats.num_bands}"
        )
    values = (features.values - stats.mean[:, None]) / stats.std[:, None]
    return replace(features, values=values, normalized=True)


def denormalize(features: FeatureMatrix, stats: NormStats) -> FeatureMatrix:
    if features.num_bands != stats.num_bands:
        raise ShapeError(
            f"feature bands {features.num_bands} != stats bands {stats.num_bands}"
        )
    values = features.values * stats.std[:, None] + stats.mean[:, None]
    return replace(features, values=values, normalized=False)


@dataclass(frozen=True)
class SequenceWindow:
    """One fixed-length context window cut from a recording.

    Frames past the end of the recording are zero in `features` and flagged
    False in `mask`; `targets` is None when the caller supplied no roll.
    """

    features: np.ndarray  # (F, L)
    targets: np.ndarray | None  # (K, L) in {0, 1}
    mask: np.ndarray  # (L,) bool, True on real frames
    start_frame: int


def split_sequences(
    features: FeatureMatrix,
    targets=None,
    length_frames: int = 128,
    train_mode: bool = False,
    epoch_index: int = 0,
) -> list[SequenceWindow]:
    """Cut a recording into non-overlapping context windows.

    Training mode starts at offset (epoch_index * 73) mod length_frames so
    consecutive epochs see differently-phased windows; evaluation always
    starts at frame 0. `targets` is an EventRoll or None.
    """
    if length_frames < 1:
        raise ConfigError(f"length_frames must be at least 1, got {length_frames}")
    num_frames = features.num_frames
    if num_frames < 1:
        raise EmptyInputError("no frames to window")
    activity = None
    if targets is not None:
        # accepts an EventRoll or a bare (K, T) array
        activity = np.asarray(getattr(targets, "activity", targets))
        if activity.shape[1] != num_frames:
            raise ShapeError(
                f"targets cover {activity.shape[1]} frames but features cover {num_frames}"
            )
    offset = (epoch_index * SEQUENCE_OFFSET_STRIDE) % length_frames if train_mode else 0

    windows = []
    for start in range(offset, num_frames, length_frames):
        real = min(start + length_frames, num_frames) - start
        window_values = np.zeros((features.num_bands, length_frames), dtype=features.values.dtype)
        window_values[:, :real] = features.values[:, start : start + real]
        window_targets = None
        if activity is not None:
            window_targets = np.zeros((activity.shape[0], length_frames), dtype=np.uint8)
            window_targets[:, :real] = activity[:, start : start + real]
        mask = np.zeros(length_frames, dtype=bool)
        mask[:real] = True
        windows.append(
            SequenceWindow(
                features=window_values, targets=window_targets, mask=mask, start_frame=start
            )
        )
    return windows


def save_feature_cache(path: str | Path, features: FeatureMatrix, stats_id: str = "raw", extra_meta: dict | None = None) -> None:
    """Persist one FeatureMatrix (row-major float32 values plus metadata)."""
    meta = {
        "num_bands": features.num_bands,
        "num_frames": features.num_frames,
        "frame_hop_seconds": features.frame_hop_seconds,
        "normalized": bool(features.normalized),
        "stats_id": stats_id,
    }
    if extra_meta:
        meta.update(extra_meta)
    write_container(path, "features", meta, {"values": features.values.astype(np.float32)})


def load_feature_cache(path: str | Path) -> tuple[FeatureMatrix, dict]:
    _, meta, blobs = read_container(path, expect_kind="features")
    features = FeatureMatrix(
        values=blobs["values"].astype(np.float64),
        frame_hop_seconds=float(meta["frame_hop_seconds"]),
        normalized=bool(meta["normalized"]),
    )
    return features, meta
