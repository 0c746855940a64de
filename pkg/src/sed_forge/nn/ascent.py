"""Gradient ascent on the input to show what a conv feature map responds to."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .network import Network


@dataclass(frozen=True)
class AscentResult:
    pattern: np.ndarray  # (bands, time) input after the final accepted step
    initial_activation: float
    final_activation: float
    accepted_steps: int


def _block_activation(network: Network, x: np.ndarray, relu_index: int, unit: int):
    """Mean post-ReLU activation of one feature map, inference mode."""
    out = x[:, None, :, :]
    for layer in network.layers[: relu_index + 1]:
        out = layer.forward(out, training=False)
    return float(out[0, unit].mean()), out


def _input_gradient(network: Network, out: np.ndarray, relu_index: int, unit: int) -> np.ndarray:
    dout = np.zeros_like(out)
    # d(mean activation)/d(map) spreads 1/size over the selected map
    dout[0, unit] = 1.0 / out[0, unit].size
    dx = dout
    for layer in reversed(network.layers[: relu_index + 1]):
        dx = layer.backward(dx)
    return dx[:, 0, :, :]


def input_gradient_ascent(
    network: Network,
    conv_layer: int,
    unit: int,
    num_frames: int,
    steps: int = 100,
    step_size: float = 0.1,
    seed: int = 0,
) -> AscentResult:
    """Maximize one conv map's mean activation over the input.

    Starts from standard-Gaussian noise and walks `steps` updates along the
    L2-normalized input gradient; a step that would lower the activation is
    rejected, so the tracked activation never decreases.
    """
    if not network.conv_blocks:
        raise ConfigError("the network has no convolutional layers to visualize")
    if not 0 <= conv_layer < len(network.conv_blocks):
        raise ConfigError(
            f"conv layer {conv_layer} out of range ({len(network.conv_blocks)} blocks)"
        )
    relu_index, maps = network.conv_blocks[conv_layer]
    if not 0 <= unit < maps:
        raise ConfigError(f"unit {unit} out of range (layer has {maps} feature maps)")
    if num_frames < 1:
        raise ConfigError(f"num_frames must be at least 1, got {num_frames}")

    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    x = rng.standard_normal((1, network.spec.num_bands, num_frames)).astype(network.dtype)

    activation, out = _block_activation(network, x, relu_index, unit)
    initial = activation
    accepted = 0
    for _ in range(steps):
        grad = _input_gradient(network, out, relu_index, unit)
        norm = float(np.sqrt(np.sum(grad.astype(np.float64) ** 2)))
        if norm == 0.0:
            break
        candidate = x + (step_size / norm) * grad
        new_activation, new_out = _block_activation(network, candidate, relu_index, unit)
        if new_activation > activation:
            x, activation, out = candidate, new_activation, new_out
            accepted += 1
    return AscentResult(
        pattern=x[0].copy(),
        initial_activation=initial,
        final_activation=activation,
        accepted_steps=accepted,
    )
