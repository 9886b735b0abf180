"""Training loop, configuration and finite-difference gradient checks."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..layers import LayerKind
from .certify import EPS_COLUMNS, certify
from .losses import mse_loss, offset_ce_loss
from .network import Network
from .optim import default_learning_rate, schedule_lr, sgd_step

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "loss", "accuracy") + EPS_COLUMNS
DEFAULT_EPSILON = 36 / 255


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float | None = None
    momentum: float = 0.9
    nesterov: bool = True
    schedule: str = "one_cycle"
    epochs: int = 1000
    batch_size: int = 256
    loss: str = "offset_ce"
    epsilon: float = DEFAULT_EPSILON
    offset: float | None = None
    temperature: float = 0.25
    nact_init: str = "absid"
    nact_lr_scale: float = 0.1
    nact_abs_theta1: float = -100.0
    layer_type: str = "aol"
    subtract_mean: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.offset is None:
            self.offset = 2.0 * math.sqrt(2.0) * self.epsilon if self.loss == "offset_ce" else 0.0
        if self.learning_rate is None:
            self.learning_rate = default_learning_rate(self.layer_type)

    @classmethod
    def toy(cls, **overrides) -> "TrainConfig":
        """Settings of the one-dimensional curve-fitting experiment."""
        base = dict(learning_rate=0.01, momentum=0.9, nesterov=True, schedule="constant",
                    epochs=1000, batch_size=100, loss="mse")
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class History:
    rows: list[dict] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r["loss"] for r in self.rows])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: ("" if r.get(k) is None else r[k]) for k in HISTORY_COLUMNS})


def _loss(config: TrainConfig, pred, target):
    if config.loss == "mse":
        return mse_loss(pred, target)
    if config.loss == "offset_ce":
        return offset_ce_loss(pred, target, config.offset, config.temperature)
    raise ValueError(f"unknown loss {config.loss!r}")


def train(net: Network, data, config: TrainConfig, eval_data=None,
          augment: Callable | None = None, on_epoch: Callable | None = None):
    """Fit ``net`` in place; returns ``(net, history)``.

    ``data`` is ``(inputs, targets)`` for ``mse`` or ``(inputs, labels)`` for
    ``offset_ce``.  The per-epoch ``loss`` is the full training-set loss for
    regression and the mean batch loss for classification, where accuracy and
    certified robust accuracy are measured on ``eval_data`` (or the training
    set).  ``augment(X, rng)`` is applied to every batch.
    """
    X, Y = data
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    if X.ndim == 1:
        X = X[:, None]
    if config.loss == "mse" and Y.ndim == 1:
        Y = Y[:, None].astype(np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("training data is empty")
    if config.subtract_mean:
        net.input_mean = X.mean(axis=0)
    rng = np.random.default_rng(config.seed)
    params = net.parameters()
    velocity = [np.zeros_like(p) for p in params]
    steps_per_epoch = math.ceil(n / config.batch_size)
    total = steps_per_epoch * config.epochs
    classify = config.loss == "offset_ce"
    history = History()
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = X[idx] if augment is None else augment(X[idx], rng)
            out, tape = net.forward(xb, train=True)
            loss, grad = _loss(config, out, Y[idx])
            if not math.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss {loss} at epoch {epoch}, step {step}")
            grads = net.backward(tape, grad)
            lr = schedule_lr(config.learning_rate, config.schedule, step, total)
            sgd_step(params, grads, lr, config.momentum, config.nesterov, velocity)
            net.mark_updated()
            batch_losses.append(loss)
            step += 1
        row = {"epoch": epoch}
        if classify:
            row["loss"] = float(np.mean(batch_losses))
            ex, ey = eval_data if eval_data is not None else (X, Y)
            report = certify(net, ex, ey)
            row["accuracy"] = report.accuracy
            row.update(zip(EPS_COLUMNS, report.cra().tolist()))
        else:
            row["loss"] = mse_loss(net(X), Y)[0]
        if not math.isfinite(row["loss"]):
            raise TrainingDiverged(f"non-finite loss {row['loss']} after epoch {epoch}")
        history.rows.append(row)
        if on_epoch is not None:
            on_epoch(epoch, net, row)
        log.debug("epoch %d loss %.6g", epoch, row["loss"])
    return net, history


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped: int


def _same_patterns(a, b) -> bool:
    for pa, pb in zip(a, b):
        if pa is None and pb is None:
            continue
        if pa is None or pb is None or not np.array_equal(pa, pb):
            return False
    return True


def _param_kinks(net: Network) -> list:
    # kinks in parameter space: the AOL rescaling uses |P^T P|, and an
    # N-activation swaps the roles of its two thresholds when they cross
    out = [np.sign(l.p.P.T @ l.p.P) for l in net.dense_layers if l.kind is LayerKind.AOL]
    for l in net.layers:
        if getattr(l, "phi", None) is not None:
            th = l.theta
            out.append(np.where(l.abs_mode, 0.0, np.sign(th[:, 1] - th[:, 0])))
    return out


def grad_check(net: Network, x, h: float = 1e-6, seed: int = 0,
               floor: float = 1e-4) -> GradCheckResult:
    """Compare backward against central differences for every parameter entry.

    The loss is a fixed random linear functional of the output.  Entries whose
    perturbation changes any activation branch, the sign of an entry of
    ``P^T P`` in an AOL layer, or the order of an N-activation's thresholds
    are skipped.  CPL norm
    estimates are held at their base values, matching the backward pass.
    The error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    w = np.random.default_rng(seed).standard_normal((X.shape[0], net.output_dim))

    def run():
        out, tape = net.forward(X, train=True, update_sigma=False)
        return float(np.sum(w * out)), net.patterns(tape) + _param_kinks(net)

    net.forward(X, train=True)  # refresh CPL norm estimates
    _, tape = net.forward(X, train=True, update_sigma=False)
    base_patterns = net.patterns(tape) + _param_kinks(net)
    analytic = net.backward(tape, w)
    worst, checked, skipped = 0.0, 0, 0
    for p, g in zip(net.parameters(), analytic):
        for i in np.ndindex(p.shape):
            orig = p[i]
            p[i] = orig + h
            lp, pat_p = run()
            p[i] = orig - h
            lm, pat_m = run()
            p[i] = orig
            if not (_same_patterns(pat_p, base_patterns) and _same_patterns(pat_m, base_patterns)):
                skipped += 1
                continue
            num = (lp - lm) / (2 * h)
            err = abs(num - g[i]) / max(abs(num), abs(g[i]), floor)
            worst = max(worst, err)
            checked += 1
    net.mark_updated()
    return GradCheckResult(worst, checked, skipped)
