"""Saving and loading trained models as single-file containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .container import read_container, write_container
from .errors import CorruptFileError
from .features import FeatureConfig, NormStats
from .nn.network import Network
from .nn.spec import NetworkSpec


@dataclass(frozen=True)
class TrainedModel:
    """A network plus everything needed to apply it to raw audio."""

    network: Network
    classes: tuple[str, ...]
    features: FeatureConfig
    stats: NormStats


def save_model(path, network: Network, classes: tuple[str, ...],
               features: FeatureConfig, stats: NormStats) -> None:
    meta = {
        "spec": network.spec.to_dict(),
        "dtype": str(np.dtype(network.dtype)),
        "classes": list(classes),
        "features": features.to_meta(),
        "stats_id": stats.identity(),
    }
    blobs = dict(network.state_dict())
    blobs["norm.mean"] = stats.mean
    blobs["norm.std"] = stats.std
    write_container(path, "model", meta, blobs)


def load_model(path) -> TrainedModel:
    _, meta, blobs = read_container(path, expect_kind="model")
    stats = NormStats(mean=blobs.pop("norm.mean"), std=blobs.pop("norm.std"))
    if stats.identity() != meta["stats_id"]:
        raise CorruptFileError(f"{path}: stored norm stats do not match their identity")
    spec = NetworkSpec.from_dict(meta["spec"])
    network = Network.initialize(spec, dtype=np.dtype(meta["dtype"]))
    network.load_state(blobs)
    return TrainedModel(network=network,
                        classes=tuple(meta["classes"]),
                        features=FeatureConfig.from_meta(meta["features"]),
                        stats=stats)
