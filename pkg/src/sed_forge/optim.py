"""Adam with bias correction; updates parameter arrays in place."""

from __future__ import annotations

import numpy as np

from .errors import DivergedError, ShapeError


class Adam:
    """Standard Adam; defaults follow the original formulation."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """One bias-corrected update of every parameter."""
        self.step_count += 1
        correct1 = 1.0 - self.beta1 ** self.step_count
        correct2 = 1.0 - self.beta2 ** self.step_count
        for name, param in params.items():
            if name not in grads:
                raise ShapeError(f"no gradient for parameter {name}")
            grad = grads[name]
            if not np.all(np.isfinite(grad)):
                raise DivergedError(f"non-finite gradient for parameter {name}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param -= self.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + self.epsilon)

    def state_blobs(self) -> dict[str, np.ndarray]:
        """Moment tensors under stable names, for checkpoints."""
        out = {}
        for name, value in self.m.items():
            out[f"adam.m.{name}"] = value
        for name, value in self.v.items():
            out[f"adam.v.{name}"] = value
        return out

    def load_state_blobs(self, blobs: dict[str, np.ndarray]) -> None:
        for name, target in self.m.items():
            source = blobs[f"adam.m.{name}"]
            if source.shape != target.shape:
                raise ShapeError(f"adam.m.{name}: shape {source.shape} != {target.shape}")
            target[...] = source.astype(target.dtype)
        for name, target in self.v.items():
            source = blobs[f"adam.v.{name}"]
            if source.shape != target.shape:
                raise ShapeError(f"adam.v.{name}: shape {source.shape} != {target.shape}")
            target[...] = source.astype(target.dtype)
