"""Margin certificates for networks whose score map is 1-Lipschitz."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CERT_EPSILONS = (36 / 255, 72 / 255, 108 / 255, 1.0)
EPS_COLUMNS = ("cra36", "cra72", "cra108", "cra255")


def certified_radius(scores, factor: float = math.sqrt(2.0)):
    """``(top1 - top2) / factor`` per score vector; 0 on ties."""
    s = np.asarray(scores, dtype=np.float64)
    if s.shape[-1] < 2:
        raise ValueError("need at least two scores")
    top2 = np.sort(s, axis=-1)[..., -2:]
    r = (top2[..., 1] - top2[..., 0]) / factor
    return float(r) if np.ndim(r) == 0 else r


@dataclass
class CertReport:
    labels: np.ndarray
    predicted: np.ndarray
    radius: np.ndarray
    epsilons: tuple[float, ...] = CERT_EPSILONS
    correct: np.ndarray = field(init=False)
    robust: np.ndarray = field(init=False)

    def __post_init__(self):
        self.correct = self.predicted == self.labels
        # certified at eps means strictly inside the radius
        self.robust = self.radius[:, None] > np.asarray(self.epsilons)[None, :]

    @property
    def accuracy(self) -> float:
        return float(self.correct.mean()) if self.correct.size else 0.0

    def cra(self) -> np.ndarray:
        """Fraction correct and certified at each epsilon."""
        if not self.correct.size:
            return np.zeros(len(self.epsilons))
        return (self.robust & self.correct[:, None]).mean(axis=0)


def certify(net, X, labels, factor: float = math.sqrt(2.0),
            epsilons=CERT_EPSILONS) -> CertReport:
    scores = net(np.atleast_2d(X))
    return CertReport(np.asarray(labels), scores.argmax(axis=1),
                      np.atleast_1d(certified_radius(scores, factor)), tuple(epsilons))
