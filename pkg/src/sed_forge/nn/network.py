"""Assembles layer stacks from a NetworkSpec and runs them end to end."""

from __future__ import annotations

import numpy as np

from ..errors import EngineStateError, SedForgeError, ShapeError
from .layers import (
    BatchNorm,
    Conv2dSame,
    Dense,
    Dropout,
    FreqMaxPool,
    GRULayer,
    Relu,
    StackMaps,
    TemporalMaxPool,
)
from .spec import (
    BatchNormSpec,
    ConvSpec,
    DenseSpec,
    DropoutSpec,
    NetworkSpec,
    RecurrentSpec,
    TemporalMaxPoolSpec,
)


class Network:
    """A spec plus its instantiated layers, parameters, and running stats.

    Input to forward is (batch, bands, time); output is (batch, classes, time)
    or (batch, classes, 1) when the spec pools over time.
    """

    def __init__(self, spec: NetworkSpec, layers: list, dtype, conv_blocks: list):
        self.spec = spec
        self.layers = layers
        self.dtype = np.dtype(dtype)
        self.has_conv = any(isinstance(layer, Conv2dSame) for layer in layers)
        # (index of the post-conv ReLU primitive, feature maps there), per conv block
        self.conv_blocks = conv_blocks
        self._forward_ready = False

    @classmethod
    def initialize(cls, spec: NetworkSpec, dtype=np.float32) -> "Network":
        """Build and He-initialize all layers, deterministic under spec.seed."""
        spec.raise_if_invalid()
        conv_positions = [i for i, l in enumerate(spec.layers) if isinstance(l, ConvSpec)]
        has_conv = bool(conv_positions)
        last_conv = conv_positions[-1] if has_conv else -1

        layers: list = []
        conv_blocks: list = []
        maps = 1
        bands = spec.num_bands
        features = None if has_conv else spec.num_bands
        in_conv_stage = has_conv
        for i, lspec in enumerate(spec.layers):
            name = f"L{i}"
            if isinstance(lspec, ConvSpec):
                layers.append(Conv2dSame(f"{name}.conv", maps, lspec.feature_maps, lspec.kernel))
                maps = lspec.feature_maps
                if lspec.batch_norm:
                    layers.append(BatchNorm(f"{name}.bn", maps))
                layers.append(Relu(f"{name}.relu"))
                conv_blocks.append((len(layers) - 1, maps))
                if lspec.freq_pool > 1:
                    layers.append(FreqMaxPool(f"{name}.pool", lspec.freq_pool))
                    bands //= lspec.freq_pool
                if lspec.dropout > 0:
                    layers.append(Dropout(f"{name}.drop", lspec.dropout))
                if i == last_conv:
                    layers.append(StackMaps("stack"))
                    features = maps * bands
                    in_conv_stage = False
            elif isinstance(lspec, RecurrentSpec):
                layers.append(GRULayer(f"{name}.gru", features, lspec.units, lspec.recurrent_dropout))
                features = lspec.units
            elif isinstance(lspec, DenseSpec):
                layers.append(Dense(f"{name}.dense", features, lspec.units, lspec.activation))
                features = lspec.units
            elif isinstance(lspec, BatchNormSpec):
                layers.append(BatchNorm(f"{name}.bn", maps if in_conv_stage else features))
            elif isinstance(lspec, DropoutSpec):
                layers.append(Dropout(f"{name}.drop", lspec.rate))
            elif isinstance(lspec, TemporalMaxPoolSpec):
                layers.append(TemporalMaxPool(f"{name}.tmax"))

        rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed)]))
        for layer in layers:
            layer.init_params(rng, dtype)
        return cls(spec, layers, dtype, conv_blocks)

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 3:
            raise ShapeError(f"forward expects (batch, bands, time), got shape {x.shape}")
        if x.shape[1] != self.spec.num_bands:
            raise ShapeError(
                f"input has {x.shape[1]} bands but the spec declares {self.spec.num_bands}"
            )
        x = x.astype(self.dtype, copy=False)
        if self.has_conv:
            x = x[:, None, :, :]
        for idx, layer in enumerate(self.layers):
            try:
                x = layer.forward(x, training=training, rng=rng)
            except SedForgeError as exc:
                raise type(exc)(f"layer {idx} ({layer.name}): {exc}") from exc
        self._forward_ready = True
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        """Backpropagate an output gradient; fills every layer's grads and
        returns the gradient w.r.t. the (batch, bands, time) input."""
        if not self._forward_ready:
            raise EngineStateError("backward called without a preceding forward")
        self._forward_ready = False
        dx = np.asarray(dout, dtype=self.dtype)
        for idx in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[idx]
            try:
                dx = layer.backward(dx)
            except SedForgeError as exc:
                raise type(exc)(f"layer {idx} ({layer.name}): {exc}") from exc
        if self.has_conv:
            dx = dx[:, 0, :, :]
        return dx

    # parameter bookkeeping ------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Name -> live array; mutating the arrays updates the network."""
        out = {}
        for layer in self.layers:
            for key, value in layer.params.items():
                out[f"{layer.name}.{key}"] = value
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self.layers:
            for key, value in layer.grads.items():
                out[f"{layer.name}.{key}"] = value
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self.layers:
            for key, value in layer.buffers.items():
                out[f"{layer.name}.{key}"] = value
        return out

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def state_dict(self) -> dict[str, np.ndarray]:
        """Parameters plus running statistics (live references)."""
        out = self.parameters()
        out.update(self.buffers())
        return out

    def copy_state(self) -> dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.state_dict().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        current = self.state_dict()
        missing = sorted(set(current) - set(state))
        if missing:
            raise ShapeError(f"state is missing entries: {missing}")
        for name, target in current.items():
            value = np.asarray(state[name])
            if value.shape != target.shape:
                raise ShapeError(
                    f"state entry {name} has shape {value.shape}, expected {target.shape}"
                )
            target[...] = value.astype(target.dtype)
