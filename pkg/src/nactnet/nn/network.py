"""Layer containers, forward tapes and reverse-mode gradients."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import kernels
from ..activations import Kind, NActParams
from ..layers import (
    DenseParams,
    LayerKind,
    PowerIterState,
    _aol_vjp,
    _cpl_vjp,
    _soc_vjp,
    aol_forward,
    effective_bound,
    soc_forward,
    spectral_norm,
)

FORMAT_TAG = "nactnet-network"


class StaleTapeError(RuntimeError):
    """A tape was replayed after the network's parameters changed."""


class Dense:
    def __init__(self, params: DenseParams, power: PowerIterState | None = None):
        self.p = params
        self.power = power if power is not None else PowerIterState()
        self.sigma = None  # last CPL norm estimate

    @property
    def kind(self) -> LayerKind:
        return self.p.kind

    @property
    def in_dim(self) -> int:
        return self.p.in_dim

    @property
    def out_dim(self) -> int:
        return self.p.out_dim

    def parameters(self) -> list[np.ndarray]:
        return [self.p.P, self.p.b]

    def forward(self, X, train=False, update_sigma=True):
        p = self.p
        if p.kind is LayerKind.AOL:
            return aol_forward(p, X), None
        if p.kind is LayerKind.LINEAR:
            return X @ p.P.T + p.b, None
        if p.kind is LayerKind.SOC:
            terms = p.terms_train if train else p.terms_eval
            return soc_forward(p, X, terms), terms
        if update_sigma or self.sigma is None:
            self.sigma = spectral_norm(p.P, self.power)
        sigma = self.sigma
        if sigma < 1e-12:
            return X.copy(), (sigma, None)
        Z = X @ p.P.T + p.b
        return X - (2.0 / sigma**2) * np.maximum(Z, 0.0) @ p.P, (sigma, Z >= 0)

    def backward(self, X, cache, U):
        p = self.p
        if p.kind is LayerKind.AOL:
            dX, dP = _aol_vjp(p.P, X, U)
            return dX, [dP, U.sum(axis=0)]
        if p.kind is LayerKind.LINEAR:
            return U @ p.P, [U.T @ X, U.sum(axis=0)]
        if p.kind is LayerKind.SOC:
            dX, dP = _soc_vjp(p.P, X, U, cache)
            return dX, [dP, U.sum(axis=0)]
        dX, dP, db = _cpl_vjp(p.P, p.b, X, U, cache[0])
        return dX, [dP, db]

    @staticmethod
    def pattern(cache):
        if isinstance(cache, tuple) and cache[1] is not None:
            return cache[1]
        return None

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "in_dim": self.in_dim, "out_dim": self.out_dim,
               "P": self.p.P.tolist(), "b": self.p.b.tolist()}
        if self.kind is LayerKind.SOC:
            out["terms_train"] = self.p.terms_train
            out["terms_eval"] = self.p.terms_eval
        return out


class Activation:
    """One activation stage; N-activation parameters are trainable per channel.

    ``phi`` holds the raw trainable values and ``theta = scale * phi``, so with
    ``scale < 1`` the parameters see a correspondingly smaller gradient.
    """

    def __init__(self, kind: Kind | str, width: int, theta=None, abs_mode=None,
                 scale: float = 1.0):
        self.act_kind = Kind(kind)
        self.width = int(width)
        self.scale = float(scale)
        if self.act_kind is Kind.NACT:
            theta = np.zeros((width, 2)) if theta is None else np.array(theta, dtype=np.float64)
            if theta.shape != (width, 2):
                raise ValueError(f"theta must have shape ({width}, 2)")
            self.phi = theta / self.scale
            self.abs_mode = (np.zeros(width, dtype=bool) if abs_mode is None
                             else np.array(abs_mode, dtype=bool).reshape(width))
        else:
            self.phi = None
            self.abs_mode = None

    kind = "act"

    @property
    def in_dim(self) -> int:
        return self.width

    out_dim = in_dim

    @property
    def theta(self) -> np.ndarray | None:
        return None if self.phi is None else self.scale * self.phi

    def channel_params(self, j: int) -> NActParams:
        t = self.theta[j]
        return NActParams(float(t[0]), float(t[1]), bool(self.abs_mode[j]))

    def parameters(self) -> list[np.ndarray]:
        return [] if self.phi is None else [self.phi]

    def _bounds(self):
        th = self.theta
        tmin = np.where(self.abs_mode, -np.inf, th.min(axis=1))
        tmax = np.where(self.abs_mode, th[:, 1], th.max(axis=1))
        return tmin, tmax

    def forward(self, X, train=False, update_sigma=True):
        k = self.act_kind
        if k is Kind.NACT:
            tmin, tmax = self._bounds()
            return kernels.nact_forward(X, tmin, tmax)
        if k is Kind.RELU:
            mask = X >= 0
            return X * mask, mask
        if k is Kind.ABS:
            mask = X >= 0
            return np.where(mask, X, -X), mask
        if k is Kind.IDENTITY:
            return X.copy(), None
        n = (self.width // 2) * 2
        a, b = X[:, 0:n:2], X[:, 1:n:2]
        first = a >= b
        Y = X.copy()
        Y[:, 0:n:2] = np.where(first, a, b)
        Y[:, 1:n:2] = np.where(first, b, a)
        return Y, first

    def backward(self, X, cache, U):
        k = self.act_kind
        if k is Kind.NACT:
            dX, dmin, dmax = kernels.nact_backward(U, cache)
            th = self.theta
            one_is_min = th[:, 0] <= th[:, 1]
            d1 = np.where(self.abs_mode, 0.0, np.where(one_is_min, dmin, dmax))
            d2 = np.where(self.abs_mode, dmax, np.where(one_is_min, dmax, dmin))
            return dX, [self.scale * np.stack([d1, d2], axis=1)]
        if k is Kind.RELU:
            return U * cache, []
        if k is Kind.ABS:
            return np.where(cache, U, -U), []
        if k is Kind.IDENTITY:
            return U.copy(), []
        n = (self.width // 2) * 2
        first = cache
        ua, ub = U[:, 0:n:2], U[:, 1:n:2]
        dX = U.copy()
        dX[:, 0:n:2] = np.where(first, ua, ub)
        dX[:, 1:n:2] = np.where(first, ub, ua)
        return dX, []

    @staticmethod
    def pattern(cache):
        return cache

    def nonlinear_counts(self) -> tuple[int, int]:
        """Count non-linear channels as ``(n_act, abs)``."""
        k = self.act_kind
        if k is Kind.NACT:
            th = self.theta
            n_abs = int(self.abs_mode.sum())
            n_n = int(np.sum(~self.abs_mode & (th[:, 0] != th[:, 1])))
            return n_n, n_abs
        if k is Kind.ABS:
            return 0, self.width
        if k is Kind.RELU:
            return self.width, 0
        if k is Kind.MAXMIN:
            return self.width // 2, 0
        return 0, 0

    def to_json(self) -> dict:
        act = {"kind": self.act_kind.value}
        if self.act_kind is Kind.NACT:
            act["theta"] = self.theta.tolist()
            act["abs_mode"] = self.abs_mode.tolist()
            act["param_scale"] = self.scale
        return {"kind": "act", "in_dim": self.width, "out_dim": self.width, "act": act}


@dataclass
class Tape:
    inputs: list
    caches: list
    version: int
    single: bool
    train: bool
    network_id: int = 0
    output: np.ndarray | None = field(default=None, repr=False)


class Network:
    def __init__(self, layers, input_dim: int, input_mean=None, meta: dict | None = None):
        self.layers = list(layers)
        self.input_dim = int(input_dim)
        self.input_mean = None if input_mean is None else np.asarray(input_mean, np.float64)
        self.meta = dict(meta or {})
        self.version = 0
        d = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.in_dim != d:
                raise ValueError(f"layer {i} expects dimension {layer.in_dim}, got {d}")
            d = layer.out_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim if self.layers else self.input_dim

    @property
    def dense_layers(self) -> list[Dense]:
        return [l for l in self.layers if isinstance(l, Dense)]

    @property
    def activation_stages(self) -> list[Activation]:
        return [l for l in self.layers if isinstance(l, Activation)]

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def mark_updated(self) -> None:
        self.version += 1

    def forward(self, x, train: bool = False, update_sigma: bool = True):
        X = np.asarray(x, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.input_dim:
            raise ValueError(f"input has dimension {X.shape[1]}, network expects {self.input_dim}")
        if self.input_mean is not None:
            X = X - self.input_mean
        inputs, caches = [], []
        for layer in self.layers:
            inputs.append(X)
            X, cache = layer.forward(X, train=train, update_sigma=update_sigma)
            caches.append(cache)
        out = X[0] if single else X
        tape = Tape(inputs, caches, self.version, single, train, id(self), out)
        return out, tape

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, tape: Tape, upstream) -> list[np.ndarray]:
        """Gradients for every array in :meth:`parameters`, in the same order."""
        if tape.network_id != id(self) or tape.version != self.version:
            raise StaleTapeError("tape does not belong to the current parameters")
        U = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
        grads: list[list[np.ndarray]] = []
        for layer, X, cache in zip(reversed(self.layers), reversed(tape.inputs),
                                   reversed(tape.caches)):
            U, g = layer.backward(X, cache, U)
            grads.append(g)
        self.last_input_grad = U[0] if tape.single else U
        return [g for layer_grads in reversed(grads) for g in layer_grads]

    def patterns(self, tape: Tape) -> list:
        return [layer.pattern(c) for layer, c in zip(self.layers, tape.caches)]

    def as_function(self):
        """Vectorised scalar map for networks with one input and one output."""
        if self.input_dim != 1 or self.output_dim != 1:
            raise ValueError("as_function needs a 1 -> 1 network")

        def fn(x):
            xa = np.asarray(x, dtype=np.float64)
            out = self(xa.reshape(-1, 1))[:, 0]
            return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)

        return fn

    def layer_bounds(self) -> list[float | None]:
        return [effective_bound(l.p) if isinstance(l, Dense) else None for l in self.layers]

    def to_json(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "input_mean": None if self.input_mean is None else self.input_mean.tolist(),
            "layers": [layer.to_json() for layer in self.layers],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Network":
        try:
            layers = [_layer_from_json(spec) for spec in obj["layers"]]
            net = cls(layers, obj["input_dim"], obj.get("input_mean"), obj.get("meta"))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed network checkpoint: {exc}") from exc
        if "output_dim" in obj and obj["output_dim"] != net.output_dim:
            raise ValueError("checkpoint output_dim does not match its layers")
        return net

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str | Path) -> "Network":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _layer_from_json(spec: dict):
    kind = spec["kind"]
    if kind == "act":
        act = spec["act"]
        width = spec["in_dim"]
        if act["kind"] == Kind.NACT.value:
            return Activation(Kind.NACT, width, act["theta"], act.get("abs_mode"),
                              act.get("param_scale", 1.0))
        return Activation(act["kind"], width)
    params = DenseParams(spec["P"], spec["b"], kind,
                         spec.get("terms_train", 5), spec.get("terms_eval", 12))
    return Dense(params)


def network_lipschitz_audit(net: Network, trials: int, rng: np.random.Generator,
                            spread: float = 3.0) -> float:
    """Largest observed output/input distance ratio over random input pairs."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = net.input_dim
    X = rng.standard_normal((trials, d)) * rng.uniform(0.1, spread, size=(trials, 1))
    delta = rng.standard_normal((trials, d)) * 10.0 ** rng.uniform(-3, 0.5, size=(trials, 1))
    fx, fy = net(X), net(X + delta)
    ratio = np.linalg.norm(fx - fy, axis=1) / np.linalg.norm(delta, axis=1)
    return float(ratio.max())
