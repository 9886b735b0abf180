"""Regression and margin-aware classification losses with their gradients."""

import numpy as np
from scipy.special import log_softmax


def mse_loss(pred, target):
    """Mean of squared differences over every entry, and its gradient."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def offset_ce_loss(scores, labels, offset: float, temperature: float):
    """Cross-entropy on ``(scores - offset * onehot) / temperature``, times temperature.

    Accepts one score vector with an integer label or a batch ``(n, c)`` with
    ``n`` labels; the batch loss is the mean.  With ``offset = 0`` and
    ``temperature = 1`` this is plain softmax cross-entropy.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    s = np.asarray(scores, dtype=np.float64)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    y = np.atleast_1d(np.asarray(labels))
    n, c = s.shape
    if y.shape != (n,) or not np.issubdtype(y.dtype, np.integer) or np.any((y < 0) | (y >= c)):
        raise ValueError(f"labels must be {n} integers in [0, {c})")
    onehot = np.zeros_like(s)
    onehot[np.arange(n), y] = 1.0
    z = (s - offset * onehot) / temperature
    logp = log_softmax(z, axis=1)
    loss = -temperature * logp[np.arange(n), y]
    grad = (np.exp(logp) - onehot) / n
    if single:
        return float(loss[0]), grad[0]
    return float(loss.mean()), grad
