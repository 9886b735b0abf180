"""Nesterov SGD and learning-rate schedules."""

from __future__ import annotations

import math

import numpy as np

from ..layers import LayerKind

# peak learning rates per layer type for the classification runs
LAYER_LEARNING_RATES = {
    LayerKind.AOL: 10**-1.6,
    LayerKind.CPL: 10**-0.4,
    LayerKind.SOC: 10**-1.0,
}

WARMUP_FRACTION = 0.3
WARMUP_START_DIV = 25.0
FINAL_DIV = 1e4


def default_learning_rate(layer_kind: LayerKind | str) -> float:
    return LAYER_LEARNING_RATES[LayerKind(layer_kind)]


def schedule_lr(peak: float, schedule: str, step: int, total_steps: int) -> float:
    """Learning rate at ``step`` (0-based) of ``total_steps``.

    ``one_cycle`` rises linearly from ``peak/25`` to ``peak`` over the first 30%
    of steps, then follows a half cosine down to ``peak/1e4``.
    """
    if schedule == "constant":
        return peak
    if schedule != "one_cycle":
        raise ValueError(f"unknown schedule {schedule!r}")
    warm = max(1, int(WARMUP_FRACTION * total_steps))
    start = peak / WARMUP_START_DIV
    if step < warm:
        return start + (peak - start) * step / warm
    span = max(1, total_steps - 1 - warm)
    frac = min(1.0, (step - warm) / span)
    end = peak / FINAL_DIV
    return end + (peak - end) * 0.5 * (1.0 + math.cos(math.pi * frac))


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray], lr: float,
             momentum: float = 0.9, nesterov: bool = True,
             velocity: list[np.ndarray] | None = None) -> list[np.ndarray]:
    """In-place momentum SGD update; returns the velocity buffers.

    Buffers start at zero.  The Nesterov variant steps along
    ``g + momentum * v`` after ``v <- momentum * v + g``.
    """
    if velocity is None:
        velocity = [np.zeros_like(p) for p in params]
    for p, g, v in zip(params, grads, velocity):
        if momentum:
            v *= momentum
            v += g
            step = g + momentum * v if nesterov else v
        else:
            step = g
        p -= lr * step
    return velocity
