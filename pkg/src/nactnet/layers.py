"""Dense 1-Lipschitz linear layers and their reverse-mode derivatives.

Inputs are either a single vector ``(d,)`` or a batch ``(n, d)`` of row
vectors; outputs have the matching shape.  ``P`` always has shape
``(out, in)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

SOC_TERMS_TRAIN = 5
SOC_TERMS_EVAL = 12
CPL_DEGENERATE_NORM = 1e-12


class LayerKind(str, Enum):
    AOL = "aol"
    CPL = "cpl"
    SOC = "soc"
    LINEAR = "linear"


@dataclass
class DenseParams:
    P: np.ndarray
    b: np.ndarray
    kind: LayerKind = LayerKind.AOL
    terms_train: int = SOC_TERMS_TRAIN
    terms_eval: int = SOC_TERMS_EVAL

    def __post_init__(self):
        self.P = np.array(self.P, dtype=np.float64, ndmin=2, order="C")
        self.b = np.array(self.b, dtype=np.float64).reshape(-1)
        self.kind = LayerKind(self.kind)
        rows, cols = self.P.shape
        if self.kind is LayerKind.SOC and rows != cols:
            raise ValueError("SOC needs a square parameter matrix")
        if self.b.size != rows:
            raise ValueError(f"bias has {self.b.size} entries, expected {rows}")

    @property
    def in_dim(self) -> int:
        return self.P.shape[1]

    @property
    def out_dim(self) -> int:
        # CPL is a residual map on its input space; P only sets the hidden size
        return self.P.shape[1] if self.kind is LayerKind.CPL else self.P.shape[0]


@dataclass
class PowerIterState:
    u: np.ndarray | None = None
    iters: int = 100
    tol: float = 1e-10
    sigma: float = 0.0
    residual: float = math.inf
    steps: int = 0


def _as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    xa = np.asarray(x, dtype=np.float64)
    single = xa.ndim == 1
    xa = np.atleast_2d(xa)
    if xa.shape[1] != dim:
        raise ValueError(f"input has dimension {xa.shape[1]}, layer expects {dim}")
    return xa, single


def _unbatch(y: np.ndarray, single: bool) -> np.ndarray:
    return y[0] if single else y


# --- AOL ---------------------------------------------------------------------

def aol_diag(P) -> np.ndarray:
    """Rescaling ``D_ii = (sum_j |P^T P|_ij)^(-1/2)``; zero rows of ``|P^T P|`` give 1."""
    P = np.asarray(P, dtype=np.float64)
    r = np.abs(P.T @ P).sum(axis=1)
    d = np.ones_like(r)
    nz = r > 0
    d[nz] = r[nz] ** -0.5
    return d


def aol_weight(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    return P * aol_diag(P)[None, :]


def aol_forward(params: DenseParams, x):
    X, single = _as_batch(x, params.in_dim)
    return _unbatch(X @ aol_weight(params.P).T + params.b, single)


def _aol_vjp(P, X, U):
    G = P.T @ P
    r = np.abs(G).sum(axis=1)
    nz = r > 0
    d = np.ones_like(r)
    d[nz] = r[nz] ** -0.5
    W = P * d[None, :]
    dW = U.T @ X
    dP = dW * d[None, :]
    dd = (dW * P).sum(axis=0)
    dr = np.zeros_like(r)
    dr[nz] = -0.5 * dd[nz] * r[nz] ** -1.5
    dG = dr[:, None] * np.sign(G)
    dP += P @ (dG + dG.T)
    return U @ W, dP


# --- power iteration ---------------------------------------------------------

def spectral_norm(P, state: PowerIterState | None = None) -> float:
    """Largest singular value of ``P`` by warm-started power iteration on ``P^T P``.

    The iterate and the final residual ``||P^T P u - s^2 u|| / s^2`` are kept in
    ``state``; a shortfall in convergence shows up there, not as an error.
    """
    P = np.asarray(P, dtype=np.float64)
    if state is None:
        state = PowerIterState()
    n = P.shape[1]
    if not np.any(P):
        state.sigma, state.residual, state.steps = 0.0, 0.0, 0
        return 0.0
    u = state.u
    if u is None or u.shape != (n,) or not np.all(np.isfinite(u)):
        u = np.random.default_rng(0).standard_normal(n)
    u = u / np.linalg.norm(u)
    sigma = np.linalg.norm(P @ u)
    steps = 0
    for steps in range(1, state.iters + 1):
        w = P.T @ (P @ u)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # u landed in the null space
            u = np.random.default_rng(steps).standard_normal(n)
            u /= np.linalg.norm(u)
            continue
        u = w / nw
        new_sigma = np.linalg.norm(P @ u)
        done = abs(new_sigma - sigma) <= state.tol * new_sigma
        sigma = new_sigma
        if done:
            break
    w = P.T @ (P @ u)
    state.u = u
    state.sigma = float(sigma)
    state.steps = steps
    state.residual = float(np.linalg.norm(w - sigma**2 * u) / sigma**2) if sigma > 0 else 0.0
    return float(sigma)


# --- CPL ---------------------------------------------------------------------

def cpl_forward(params: DenseParams, x, state: PowerIterState | None = None,
                sigma: float | None = None):
    """``x - (2/||P||^2) P^T relu(P x + b)``; ``sigma`` skips the norm estimate."""
    X, single = _as_batch(x, params.in_dim)
    if sigma is None:
        sigma = spectral_norm(params.P, state)
    if sigma < CPL_DEGENERATE_NORM:
        return _unbatch(X.copy(), single)
    Z = X @ params.P.T + params.b
    Y = X - (2.0 / sigma**2) * np.maximum(Z, 0.0) @ params.P
    return _unbatch(Y, single)


def _cpl_vjp(P, b, X, U, sigma):
    if sigma < CPL_DEGENERATE_NORM:
        return U.copy(), np.zeros_like(P), np.zeros_like(b)
    c = 2.0 / sigma**2
    Z = X @ P.T + b
    mask = Z >= 0
    Gz = -c * (U @ P.T) * mask
    dX = U + Gz @ P
    dP = -c * np.maximum(Z, 0.0).T @ U + Gz.T @ X
    return dX, dP, Gz.sum(axis=0)


# --- SOC ---------------------------------------------------------------------

def skew(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    return 0.5 * (P - P.T)


def soc_forward(params: DenseParams, x, terms: int | None = None):
    """Truncated ``exp(A) x + b`` with ``A`` the skew part of ``P``."""
    terms = params.terms_eval if terms is None else terms
    if terms < 1:
        raise ValueError("SOC needs at least one series term")
    X, single = _as_batch(x, params.in_dim)
    At = skew(params.P).T
    term = X
    Y = X.copy()
    for j in range(1, terms + 1):
        term = term @ At / j
        Y += term
    return _unbatch(Y + params.b, single)


def soc_matrix(P, terms: int) -> np.ndarray:
    A = skew(P)
    S = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for j in range(1, terms + 1):
        term = term @ A / j
        S += term
    return S


def _soc_vjp(P, X, U, terms):
    A = skew(P)
    At = A.T
    xs = [X]
    us = [U]
    for _ in range(terms - 1):
        xs.append(xs[-1] @ At)
        us.append(us[-1] @ A)
    dX = U.copy()
    term = U
    for j in range(1, terms + 1):
        term = term @ A / j
        dX += term
    dA = np.zeros_like(A)
    fact = 1.0
    for j in range(1, terms + 1):
        fact *= j
        acc = np.zeros_like(A)
        for m in range(j):
            acc += us[m].T @ xs[j - 1 - m]
        dA += acc / fact
    return dX, 0.5 * (dA - dA.T)


# --- generic -----------------------------------------------------------------

def layer_forward(params: DenseParams, x, state: PowerIterState | None = None,
                  train: bool = False, terms: int | None = None, sigma: float | None = None):
    kind = params.kind
    if kind is LayerKind.AOL:
        return aol_forward(params, x)
    if kind is LayerKind.CPL:
        return cpl_forward(params, x, state, sigma)
    if kind is LayerKind.SOC:
        if terms is None:
            terms = params.terms_train if train else params.terms_eval
        return soc_forward(params, x, terms)
    X, single = _as_batch(x, params.in_dim)
    return _unbatch(X @ params.P.T + params.b, single)


def layer_vjp(params: DenseParams, x, upstream, sigma: float | None = None,
              terms: int | None = None, state: PowerIterState | None = None):
    """Vector-Jacobian product ``(d_x, d_P, d_b)`` of the layer at ``x``.

    For CPL the norm estimate ``sigma`` is a constant (pass the value used in
    the forward pass; otherwise it is re-estimated).  Batch inputs give
    parameter gradients summed over rows.
    """
    X, single = _as_batch(x, params.in_dim)
    U = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if U.shape != (X.shape[0], params.out_dim):
        raise ValueError(f"upstream shape {U.shape} does not match layer output")
    kind = params.kind
    if kind is LayerKind.AOL:
        dX, dP = _aol_vjp(params.P, X, U)
        db = U.sum(axis=0)
    elif kind is LayerKind.CPL:
        if sigma is None:
            sigma = spectral_norm(params.P, state)
        dX, dP, db = _cpl_vjp(params.P, params.b, X, U, sigma)
    elif kind is LayerKind.SOC:
        dX, dP = _soc_vjp(params.P, X, U, params.terms_eval if terms is None else terms)
        db = U.sum(axis=0)
    else:
        dX, dP, db = U @ params.P, U.T @ X, U.sum(axis=0)
    return _unbatch(dX, single), dP, db


def effective_bound(params: DenseParams, terms: int | None = None) -> float | None:
    """Exact operator norm for the layers that are linear maps, else ``None``."""
    if params.kind is LayerKind.AOL:
        return float(np.linalg.norm(aol_weight(params.P), 2))
    if params.kind is LayerKind.LINEAR:
        return float(np.linalg.norm(params.P, 2))
    if params.kind is LayerKind.SOC:
        t = params.terms_eval if terms is None else terms
        return float(np.linalg.norm(soc_matrix(params.P, t), 2))
    return None


class Audit(NamedTuple):
    ratio: float
    bound: float | None


def lipschitz_audit(layer: DenseParams, trials: int, rng: np.random.Generator,
                    terms: int | None = None, state: PowerIterState | None = None) -> Audit:
    """Largest observed ``||f(x) - f(y)|| / ||x - y||`` over random pairs.

    Pairs mix far-apart points with close ones so that the non-linear CPL map
    is probed locally as well.  ``bound`` is the exact operator norm where the
    layer is linear.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = layer.in_dim
    X = rng.standard_normal((trials, d)) * rng.uniform(0.1, 3.0, size=(trials, 1))
    delta = rng.standard_normal((trials, d)) * 10.0 ** rng.uniform(-3, 0.5, size=(trials, 1))
    Y = X + delta
    if layer.kind is LayerKind.CPL:
        sigma = spectral_norm(layer.P, state)
        fx = cpl_forward(layer, X, sigma=sigma)
        fy = cpl_forward(layer, Y, sigma=sigma)
    else:
        fx = layer_forward(layer, X, terms=terms)
        fy = layer_forward(layer, Y, terms=terms)
    ratio = np.linalg.norm(fx - fy, axis=1) / np.linalg.norm(delta, axis=1)
    return Audit(float(ratio.max()), effective_bound(layer, terms))


def init_dense(kind: LayerKind | str, in_dim: int, out_dim: int,
               rng: np.random.Generator) -> DenseParams:
    """Standard initialisation: (semi-)orthogonal for AOL/CPL/SOC, uniform fan-in for linear."""
    kind = LayerKind(kind)
    if kind is LayerKind.LINEAR:
        bound = 1.0 / math.sqrt(in_dim)
        P = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        b = rng.uniform(-bound, bound, size=out_dim)
        return DenseParams(P, b, kind)
    if kind in (LayerKind.SOC, LayerKind.CPL) and in_dim != out_dim:
        raise ValueError(f"{kind.value} layers map a space to itself")
    if kind is LayerKind.SOC:
        P = rng.standard_normal((in_dim, in_dim)) / math.sqrt(in_dim)
        return DenseParams(P, np.zeros(in_dim), kind)
    q, r = np.linalg.qr(rng.standard_normal((max(in_dim, out_dim), min(in_dim, out_dim))))
    q = q * np.sign(np.diag(r))[None, :]
    P = q if out_dim >= in_dim else q.T
    return DenseParams(P, np.zeros(out_dim), kind)
