"""Turning trained networks into event predictions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import read_container, write_container
from .errors import ConfigError, ShapeError
from .events import EventAnnotation, EventRoll, roll_to_events
from .features import FeatureMatrix, split_sequences
from .nn.network import Network

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ActivityProbabilities:
    """Per-class, per-frame activity probabilities for one recording."""

    values: np.ndarray  # (K, T) in [0, 1]
    classes: tuple[str, ...]
    frame_hop_seconds: float

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ShapeError(f"probabilities must be (K, T), got shape {self.values.shape}")
        if self.values.shape[0] != len(self.classes):
            raise ShapeError(
                f"{self.values.shape[0]} probability rows for {len(self.classes)} classes")
        if self.values.size and (not np.all(np.isfinite(self.values))
                                 or self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ShapeError("probabilities must lie in [0, 1]")

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DetectionResult:
    """Binary roll plus the event list read off from it."""

    roll: EventRoll
    events: tuple[EventAnnotation, ...]


def predict(network: Network, features: FeatureMatrix, classes: tuple[str, ...],
            sequence_frames: int = 128) -> ActivityProbabilities:
    """Frame-level probabilities for one recording.

    The recording is cut into non-overlapping windows starting at frame
    zero, each window is run independently (recurrent state resets), and
    the outputs are concatenated; padded tail frames are dropped so the
    result covers exactly the input frames.
    """
    if network.spec.tagging:
        raise ConfigError("network pools over time; use predict_chunk for tagging models")
    if len(classes) != network.spec.num_classes:
        raise ShapeError(f"{len(classes)} classes for a {network.spec.num_classes}-class network")
    if features.num_bands != network.spec.num_bands:
        raise ShapeError(
            f"feature bands {features.num_bands} != network bands {network.spec.num_bands}")
    if not features.normalized:
        raise ConfigError("features must be normalized with the model's training stats")
    windows = split_sequences(features, length_frames=sequence_frames)
    batch = np.stack([w.features for w in windows])
    out = network.forward(batch, training=False)
    flat = out.transpose(1, 0, 2).reshape(out.shape[1], -1)
    return ActivityProbabilities(values=flat[:, :features.num_frames],
                                 classes=tuple(classes),
                                 frame_hop_seconds=features.frame_hop_seconds)


def predict_chunk(network: Network, features: FeatureMatrix) -> np.ndarray:
    """One score per class for a whole chunk, via a temporal-pooling network."""
    if not network.spec.tagging:
        raise ConfigError("network has no temporal pooling; use predict for frame output")
    if features.num_bands != network.spec.num_bands:
        raise ShapeError(
            f"feature bands {features.num_bands} != network bands {network.spec.num_bands}")
    if not features.normalized:
        raise ConfigError("features must be normalized with the model's training stats")
    out = network.forward(features.values[None], training=False)
    return out[0, :, 0]


def binarize(probs: ActivityProbabilities, threshold: float = DEFAULT_THRESHOLD) -> EventRoll:
    """Threshold probabilities into a binary roll; p >= C counts as active."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")
    return EventRoll(classes=probs.classes,
                     activity=probs.values >= threshold,
                     frame_hop_seconds=probs.frame_hop_seconds)


def detect_events(probs: ActivityProbabilities,
                  threshold: float = DEFAULT_THRESHOLD) -> DetectionResult:
    """Binarize and read maximal runs back out as events."""
    roll = binarize(probs, threshold)
    return DetectionResult(roll=roll, events=tuple(roll_to_events(roll)))


def save_probabilities(path, probs: ActivityProbabilities) -> None:
    meta = {
        "classes": list(probs.classes),
        "frame_hop_seconds": probs.frame_hop_seconds,
    }
    write_container(path, "roll", meta, {"values": probs.values})


def load_probabilities(path) -> ActivityProbabilities:
    _, meta, blobs = read_container(path, expect_kind="roll")
    return ActivityProbabilities(values=blobs["values"],
                                 classes=tuple(meta["classes"]),
                                 frame_hop_seconds=float(meta["frame_hop_seconds"]))
