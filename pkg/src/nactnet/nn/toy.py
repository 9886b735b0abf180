"""Fitting the N-function on [-3, 3] with small dense networks."""

from __future__ import annotations

import numpy as np

from ..pwl import n_function
from .build import build_mlp
from .training import TrainConfig, train

TOY_POINTS = 1000
TOY_RANGE = (-3.0, 3.0)
TOY_WIDTH = 40
TOY_DEPTH = 3
TOY_ACTIVATIONS = ("nact", "maxmin", "abs", "relu-unconstrained")
# the 1/10 parameter rescale belongs to the classification runs; the toy
# fit trains N-activation thresholds at the full learning rate
TOY_NACT_SCALE = 1.0


def toy_data(seed: int, n: int = TOY_POINTS):
    rng = np.random.default_rng(seed)
    x = rng.uniform(*TOY_RANGE, size=n)
    return x, n_function()(x)


def fit_toy(activation: str = "nact", seed: int = 0, epochs: int = 1000,
            nact_init: str = "absid", nact_scale: float = TOY_NACT_SCALE,
            learning_rate: float = 0.01):
    """Train one toy network; returns ``(net, history)``."""
    if activation not in TOY_ACTIVATIONS:
        raise ValueError(f"activation must be one of {TOY_ACTIVATIONS}")
    x, y = toy_data(seed)
    net = build_mlp(1, 1, TOY_WIDTH, TOY_DEPTH, "aol", activation, nact_init,
                    seed=seed, nact_scale=nact_scale)
    config = TrainConfig.toy(epochs=epochs, seed=seed, learning_rate=learning_rate,
                             subtract_mean=False, nact_lr_scale=nact_scale)
    return train(net, (x, y), config)


def sample_learned(net, n: int = 601) -> tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(*TOY_RANGE, n)
    return xs, net.as_function()(xs)
