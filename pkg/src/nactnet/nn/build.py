"""N-activation initialisation and MLP construction."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..activations import Kind, NActParams
from ..layers import LayerKind, init_dense
from .network import Activation, Dense, Network

NACT_PARAM_SCALE = 0.1
ABS_THETA1 = -100.0


class NActInit(str, Enum):
    ABSID = "absid"
    ZERO = "zero"
    RANDOM = "random"


def init_nact(strategy: NActInit | str, channel: int, rng: np.random.Generator | None = None,
              abs_theta1: float = ABS_THETA1) -> NActParams:
    strategy = NActInit(strategy)
    if strategy is NActInit.ABSID:
        return NActParams(abs_theta1, 0.0) if channel % 2 == 0 else NActParams(0.0, 0.0)
    if strategy is NActInit.ZERO:
        return NActParams(0.0, 0.0)
    if rng is None:
        raise ValueError("random initialisation needs a generator")
    u1, u2 = rng.uniform(-5.0, 0.0, size=2)
    return NActParams(-(10.0**u1), 10.0**u2)


def nact_stage(width: int, strategy, rng, scale: float = NACT_PARAM_SCALE,
               abs_theta1: float = ABS_THETA1) -> Activation:
    ps = [init_nact(strategy, j, rng, abs_theta1) for j in range(width)]
    theta = np.array([[p.theta1, p.theta2] for p in ps])
    return Activation(Kind.NACT, width, theta, scale=scale)


def build_mlp(in_dim: int, out_dim: int, width: int, depth: int, layer_type="aol",
              activation="nact", nact_init="absid", seed: int = 0,
              nact_scale: float = NACT_PARAM_SCALE, abs_theta1: float = ABS_THETA1) -> Network:
    """``depth`` dense layers with an activation stage between consecutive ones.

    ``activation="relu-unconstrained"`` gives the plain ReLU baseline with
    ordinary linear layers.  For CPL and SOC, whose maps are square, the first
    and last layers are AOL layers that change dimension when needed.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = np.random.default_rng(seed)
    layer_type = LayerKind(layer_type)
    if activation == "relu-unconstrained":
        layer_type, act_kind = LayerKind.LINEAR, Kind.RELU
    else:
        act_kind = Kind(activation)
    dims = [in_dim] + [width] * (depth - 1) + [out_dim]
    layers = []
    for i in range(depth):
        d_in, d_out = dims[i], dims[i + 1]
        kind = layer_type
        if kind in (LayerKind.CPL, LayerKind.SOC) and d_in != d_out:
            kind = LayerKind.AOL
        layers.append(Dense(init_dense(kind, d_in, d_out, rng)))
        if i < depth - 1:
            if act_kind is Kind.NACT:
                layers.append(nact_stage(d_out, nact_init, rng, nact_scale, abs_theta1))
            else:
                layers.append(Activation(act_kind, d_out))
    meta = {"layer_type": layer_type.value, "activation": activation,
            "nact_init": str(NActInit(nact_init).value), "width": width, "depth": depth}
    return Network(layers, in_dim, meta=meta)


def abs_identity_twin(net: Network) -> Network:
    """Copy of ``net`` with every N-activation stage replaced by exact alternating abs/identity."""
    layers = []
    for layer in net.layers:
        if isinstance(layer, Activation) and layer.act_kind is Kind.NACT:
            mode = np.arange(layer.width) % 2 == 0
            layers.append(Activation(Kind.NACT, layer.width, np.zeros((layer.width, 2)), mode))
        elif isinstance(layer, Dense):
            layers.append(Dense(layer.p))
        else:
            layers.append(layer)
    return Network(layers, net.input_dim, net.input_mean)
