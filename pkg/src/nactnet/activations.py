"""Scalar and paired activations with value and right-branch sub-gradients.

All functions accept floats or numpy arrays.  At a kink the derivative of the
branch to the right of the kink is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

SQRT1_2 = 1.0 / math.sqrt(2.0)
# M = (1/sqrt 2) [[1, 1], [1, -1]]; orthogonal and its own inverse
MAXMIN_ROTATION = SQRT1_2 * np.array([[1.0, 1.0], [1.0, -1.0]])


@dataclass(frozen=True)
class NActParams:
    """Parameters of the N-activation.

    ``abs_mode`` stands in for ``theta1 = -inf``: the activation is then
    ``-x`` below ``theta2`` and ``x - 2*theta2`` above it.
    """

    theta1: float = 0.0
    theta2: float = 0.0
    abs_mode: bool = False

    def __post_init__(self):
        if not math.isfinite(self.theta2):
            raise ValueError("theta2 must be finite")
        if not self.abs_mode and not math.isfinite(self.theta1):
            raise ValueError("theta1 must be finite unless abs_mode is set")

    @property
    def theta_min(self) -> float:
        return -math.inf if self.abs_mode else min(self.theta1, self.theta2)

    @property
    def theta_max(self) -> float:
        return self.theta2 if self.abs_mode else max(self.theta1, self.theta2)

    @property
    def is_nonlinear(self) -> bool:
        return self.abs_mode or self.theta1 != self.theta2


class Kind(str, Enum):
    NACT = "nact"
    MAXMIN = "maxmin"
    ABS = "abs"
    RELU = "relu"
    IDENTITY = "identity"


def n_act(x, p: NActParams):
    xa = np.asarray(x, dtype=np.float64)
    lo, hi = p.theta_min, p.theta_max
    out = np.where(xa >= hi, xa - 2.0 * hi, np.where(xa >= lo, -xa, xa - 2.0 * lo))
    return float(out) if out.ndim == 0 else out


def n_act_grad(x, p: NActParams):
    """Return ``(d/dx, d/dtheta1, d/dtheta2)``.

    When ``theta1 == theta2`` the first parameter is treated as the minimum and
    the second as the maximum.  In ``abs_mode`` the first parameter gets no
    gradient.
    """
    xa = np.asarray(x, dtype=np.float64)
    lo, hi = p.theta_min, p.theta_max
    right = xa >= hi
    left = ~right & (xa < lo)
    dx = np.where(right | left, 1.0, -1.0)
    if p.abs_mode:
        d1 = np.zeros_like(xa)
        d2 = np.where(right, -2.0, 0.0)
    else:
        one_is_min = p.theta1 <= p.theta2
        d_lo = np.where(left, -2.0, 0.0)
        d_hi = np.where(right, -2.0, 0.0)
        d1, d2 = (d_lo, d_hi) if one_is_min else (d_hi, d_lo)
    if xa.ndim == 0:
        return float(dx), float(d1), float(d2)
    return dx, d1, d2


def maxmin(x, y):
    return np.maximum(x, y), np.minimum(x, y)


def maxmin_grad(x, y):
    """Jacobian entries ``(dmax/dx, dmax/dy, dmin/dx, dmin/dy)``; ties route max to x."""
    first = np.asarray(x) >= np.asarray(y)
    a = np.where(first, 1.0, 0.0)
    return a, 1.0 - a, 1.0 - a, a


def scalar_act(kind: Kind | str, x):
    kind = Kind(kind)
    xa = np.asarray(x, dtype=np.float64)
    if kind is Kind.ABS:
        out = np.abs(xa)
    elif kind is Kind.RELU:
        out = np.maximum(xa, 0.0)
    elif kind is Kind.IDENTITY:
        out = xa.copy()
    else:
        raise ValueError(f"{kind.value} is not an elementwise scalar activation")
    return float(out) if out.ndim == 0 else out


def scalar_act_grad(kind: Kind | str, x):
    kind = Kind(kind)
    xa = np.asarray(x, dtype=np.float64)
    if kind is Kind.ABS:
        out = np.where(xa >= 0, 1.0, -1.0)
    elif kind is Kind.RELU:
        out = np.where(xa >= 0, 1.0, 0.0)
    elif kind is Kind.IDENTITY:
        out = np.ones_like(xa)
    else:
        raise ValueError(f"{kind.value} is not an elementwise scalar activation")
    return float(out) if out.ndim == 0 else out


def maxmin_as_abs_identity(x, y):
    """MaxMin written as rotate, (identity, abs), rotate."""
    u = MAXMIN_ROTATION @ np.stack([np.asarray(x, dtype=np.float64),
                                    np.asarray(y, dtype=np.float64)])
    u[1] = np.abs(u[1])
    a, b = MAXMIN_ROTATION @ u
    if np.ndim(a) == 0:
        return float(a), float(b)
    return a, b
