"""Masked multi-label binary cross-entropy."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

# probabilities are clamped to this interval before the logs
CLAMP_LO = 1e-7
CLAMP_HI = 1.0 - 1e-7


def bce_loss(
    probabilities: np.ndarray, targets: np.ndarray, mask: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over unmasked (class, frame) cells.

    probabilities and targets are (batch, classes, time); mask is
    (batch, time) with True on frames that count, or None for all frames.
    Returns (loss, d_loss/d_probabilities).
    """
    probs = np.asarray(probabilities)
    y = np.asarray(targets, dtype=probs.dtype)
    if probs.shape != y.shape:
        raise ShapeError(f"probabilities {probs.shape} vs targets {y.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (probs.shape[0], probs.shape[2]):
            raise ShapeError(
                f"mask shape {mask.shape} does not match (batch, time) = "
                f"{(probs.shape[0], probs.shape[2])}"
            )
        weight = mask[:, None, :].astype(probs.dtype)
        count = int(mask.sum()) * probs.shape[1]
    else:
        weight = None
        count = probs.size
    if count == 0:
        return 0.0, np.zeros_like(probs)

    clamped = np.clip(probs, CLAMP_LO, CLAMP_HI)
    per_cell = -(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped))
    if weight is not None:
        per_cell = per_cell * weight
    loss = float(per_cell.sum(dtype=np.float64) / count)

    grad = (clamped - y) / (clamped * (1.0 - clamped)) / count
    # outside the clamp the loss is constant in the raw probability
    grad = grad * ((probs >= CLAMP_LO) & (probs <= CLAMP_HI))
    if weight is not None:
        grad = grad * weight
    return loss, grad.astype(probs.dtype)
