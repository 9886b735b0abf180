"""Exact translation of 1-CPWL functions into width-2 N-activation networks.

The construction works on a small op list (linear maps and activation stages)
that is evaluated while it is being built: every N-activation threshold is
taken from the values the partial network actually produces, so rounding in
earlier stages cannot push a later kink off its breakpoint.  Consecutive
linear maps are multiplied together as they are appended.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .activations import Kind
from .layers import DenseParams, LayerKind
from .nn.network import Activation, Dense, Network
from .pwl import (
    SLOPE_MERGE_TOL,
    CpwlError,
    CpwlFunction,
    cpwl_extremes,
    cpwl_max_abs_diff,
    cpwl_new,
    cpwl_probe_points,
)

EXACT_TOL = 1e-9
NORM_TOL = 1e-9
TAIL_PROBE = 1e6


class CompileError(RuntimeError):
    """An internal invariant of the construction did not hold."""


@dataclass(frozen=True)
class SlopeCoeffs:
    alpha: float
    beta: float


def slope_coeffs(s: float) -> SlopeCoeffs:
    """``alpha, beta >= 0`` with ``alpha**2 + beta**2 = 1`` and ``alpha**2 - beta**2 = s``."""
    s = float(s)
    if not math.isfinite(s) or abs(s) > 1.0:
        raise CpwlError(f"slope must satisfy |s| <= 1, got {s!r}")
    return SlopeCoeffs(math.sqrt((1.0 + s) / 2.0), math.sqrt((1.0 - s) / 2.0))


def _is_one(s: float) -> bool:
    return abs(s - 1.0) <= SLOPE_MERGE_TOL


class _Ops:
    """Op list for a network with one input and one output."""

    def __init__(self):
        self.ops: list = []
        self.dim = 1

    def lin(self, W, b=None):
        W = np.atleast_2d(np.asarray(W, dtype=np.float64))
        b = np.zeros(W.shape[0]) if b is None else np.asarray(b, dtype=np.float64).reshape(-1)
        if W.shape[1] != self.dim:
            raise CompileError(f"linear map expects {W.shape[1]} inputs, stage has {self.dim}")
        if self.ops and self.ops[-1][0] == "lin":
            _, W1, b1 = self.ops.pop()
            W, b = W @ W1, W @ b1 + b
            if np.linalg.norm(W, 2) > 1.0 + NORM_TOL:
                raise CompileError("merged linear map has norm above 1")
        self.ops.append(("lin", W, b))
        self.dim = W.shape[0]

    def act(self, channels):
        """``channels`` is a list of ``(theta1, theta2, abs_mode)`` per lane."""
        if len(channels) != self.dim:
            raise CompileError("activation width does not match the stage")
        theta = np.array([[c[0], c[1]] for c in channels], dtype=np.float64)
        abs_mode = np.array([bool(c[2]) for c in channels])
        self.ops.append(("act", theta, abs_mode))

    def extend(self, other: "_Ops"):
        for op in other.ops:
            if op[0] == "lin":
                self.lin(op[1], op[2])
            else:
                if op[1].shape[0] != self.dim:
                    raise CompileError("activation width does not match the stage")
                self.ops.append(op)
        return self

    def __call__(self, x) -> np.ndarray:
        X = np.asarray(x, dtype=np.float64).reshape(-1, 1)
        for op in self.ops:
            if op[0] == "lin":
                X = X @ op[1].T + op[2]
            else:
                _, theta, abs_mode = op
                tmin = np.where(abs_mode, -np.inf, theta.min(axis=1))
                tmax = np.where(abs_mode, theta[:, 1], theta.max(axis=1))
                X = kernels.nact_forward(X, tmin, tmax)[0]
        return X

    def value(self, x: float) -> float:
        return float(self(np.array([x]))[0, 0])

    def to_network(self, meta: dict | None = None) -> Network:
        layers = []
        for op in self.ops:
            if op[0] == "lin":
                _, W, b = op
                if W.shape == (1, 1) and W[0, 0] == 1.0 and b[0] == 0.0:
                    continue
                layers.append(Dense(DenseParams(W.copy(), b.copy(), LayerKind.LINEAR)))
            else:
                _, theta, abs_mode = op
                layers.append(Activation(Kind.NACT, theta.shape[0], theta, abs_mode))
        return Network(layers, 1, meta=meta)


def _check_unit_tails(f: CpwlFunction):
    if not (_is_one(f.slopes[0]) and _is_one(f.slopes[-1])):
        raise CpwlError("outer slopes must both be 1")


def _increasing_ops(f: CpwlFunction) -> _Ops:
    _check_unit_tails(f)
    if any(s < 0 for s in f.slopes):
        raise CpwlError("function must be non-decreasing")
    ops = _Ops()
    t, s = f.breakpoints, f.slopes
    # ops realizes g, which has slope 1 to the right of t[i-1]
    for i in range(1, f.k):
        c = slope_coeffs(s[i])
        lo, hi = ops.value(t[i - 1]), ops.value(t[i])
        ops.lin([[c.alpha], [c.beta]])
        ops.act([(0.0, 0.0, False), (c.beta * lo, c.beta * hi, False)])
        ops.lin([[c.alpha, c.beta]])
    probes = np.asarray(t) if f.k else np.array([0.0])
    offset = float(np.mean(f(probes) - ops(probes)[:, 0]))
    if offset != 0.0 or not ops.ops:
        ops.lin([[1.0]], [offset])
    return ops


def _pick_extremes(f: CpwlFunction, ext) -> tuple[int, int]:
    xs = np.array([x for x, _ in ext])
    vals = f(xs)
    maxima = [i for i, (_, kind) in enumerate(ext) if kind == "max"]
    top = max(vals[i] for i in maxima)
    ks = min(i for i in maxima if vals[i] == top)
    minima = [i for i, (_, kind) in enumerate(ext) if kind == "min" and i > ks]
    if not minima:
        raise CompileError("no local minimum to the right of the highest maximum")
    low = min(vals[i] for i in minima)
    kt = min(i for i in minima if vals[i] == low)
    return ks, kt


def _grad1_ops(f: CpwlFunction) -> _Ops:
    _check_unit_tails(f)
    ext = cpwl_extremes(f)
    if not ext:
        return _increasing_ops(f)
    ks, kt = _pick_extremes(f, ext)
    xs, xt = ext[ks][0], ext[kt][0]
    a, b = f.breakpoints.index(xs), f.breakpoints.index(xt)
    # negate the slopes of the segments lying between the two extremes
    slopes = [(-v if a < j <= b else v) for j, v in enumerate(f.slopes)]
    g = cpwl_new(f.breakpoints, slopes, (xs, -f(xs)))
    if len(cpwl_extremes(g)) != len(ext) - 2:
        raise CompileError("flipping did not remove exactly two extreme points")
    ops = _grad1_ops(g)
    ops.act([(ops.value(xs), ops.value(xt), False)])
    return ops


def _extend_unit_tails(f: CpwlFunction, lo: float, hi: float) -> CpwlFunction:
    t = [lo, *f.breakpoints, hi]
    s = [1.0, *f.slopes, 1.0]
    return cpwl_new(t, s, (lo, f(lo)))


def _reflect(f: CpwlFunction) -> CpwlFunction:
    """``x -> f(-x)``."""
    t = [-v for v in reversed(f.breakpoints)]
    s = [-v for v in reversed(f.slopes)]
    return cpwl_new(t, s, (-f.anchor[0], f.anchor[1]))


def _tail_adapter(ops: _Ops, s: float, v: float, right: bool):
    """Identity on one side of ``v``, slope ``s`` on the other."""
    c = slope_coeffs(s)
    ops.lin([[c.alpha], [c.beta]], [0.0, -c.beta * v])
    ops.act([(0.0, 0.0, False), (0.0, 0.0, True)])
    sign = -1.0 if right else 1.0
    ops.lin([[c.alpha, sign * c.beta]], [c.beta**2 * v])


def _nonneg_tails_ops(f: CpwlFunction) -> _Ops:
    ss, st = f.slopes[0], f.slopes[-1]
    if _is_one(ss) and _is_one(st):
        return _grad1_ops(f)
    t = list(f.breakpoints)
    vals = f.breakpoint_values
    vs = t[0] if ss == 0 else t[0] - (vals[0] - vals.min()) / ss
    vt = t[-1] if st == 0 else t[-1] + (vals.max() - vals[-1]) / st
    bps, slopes = list(t), list(f.slopes)
    if vs < t[0]:
        bps.insert(0, vs)
        slopes.insert(0, 1.0)
    else:
        slopes[0] = 1.0
    if vt > t[-1]:
        bps.append(vt)
        slopes.append(1.0)
    else:
        slopes[-1] = 1.0
    g = cpwl_new(bps, slopes, (t[0], float(vals[0])))
    ops = _Ops()
    if not _is_one(ss):
        _tail_adapter(ops, ss, vs, right=False)
    if not _is_one(st):
        _tail_adapter(ops, st, vt, right=True)
    return ops.extend(_grad1_ops(g))


def _general_ops(f: CpwlFunction) -> _Ops:
    ss, st = f.slopes[0], f.slopes[-1]
    ops = _Ops()
    if f.k == 0:
        ops.lin([[ss]], [f(0.0)])
        return ops
    if ss >= 0 and st >= 0:
        return _nonneg_tails_ops(f)
    if ss <= 0 and st <= 0:
        ops.lin([[-1.0]])
        return ops.extend(_nonneg_tails_ops(_reflect(f)))
    # tails of opposite sign: split at the leftmost global extremum
    vals = f.breakpoint_values
    sign = 1.0 if ss < 0 else -1.0
    idx = int(np.argmin(vals)) if sign > 0 else int(np.argmax(vals))
    vm, m = f.breakpoints[idx], float(vals[idx])
    slopes = [(-v if j > idx else v) for j, v in enumerate(f.slopes)]
    g = cpwl_new(f.breakpoints, slopes, (vm, m))
    ops = _general_ops(g)
    gm = ops.value(vm)
    ops.act([(gm, gm, True)])
    ops.lin([[sign]], [sign * gm + m])
    return ops


def compile_increasing(f: CpwlFunction) -> Network:
    """Compile a non-decreasing function whose outer slopes are 1."""
    return _increasing_ops(f).to_network({"source": "compile_increasing", "k": f.k})


def compile_grad1_tails(f: CpwlFunction) -> Network:
    """Compile a function whose outer slopes are 1."""
    return _grad1_ops(f).to_network({"source": "compile_grad1_tails", "k": f.k})


def compile_bounded(f: CpwlFunction, lo: float, hi: float) -> Network:
    """Network equal to ``f`` on ``[lo, hi]`` with slope 1 outside."""
    if not lo < hi:
        raise CpwlError(f"need lo < hi, got [{lo}, {hi}]")
    if f.k and not (lo < f.breakpoints[0] and f.breakpoints[-1] < hi):
        raise CpwlError("all breakpoints must lie strictly inside (lo, hi)")
    g = _extend_unit_tails(f, lo, hi)
    return _grad1_ops(g).to_network({"source": "compile_bounded", "k": f.k, "lo": lo, "hi": hi})


def compile(f: CpwlFunction) -> Network:
    """Network equal to ``f`` on the whole real line."""
    return _general_ops(f).to_network({"source": "compile", "k": f.k})


def linear_bound(k: int) -> int:
    return k + 5


def activation_bound(k: int) -> int:
    return math.ceil(3 * k / 2) + 5


@dataclass
class CompileReport:
    k: int
    linear_layer_count: int
    n_act_count: int
    abs_act_count: int
    max_abs_error: float
    probe_count: int
    max_spectral_norm: float
    tail_error: float | None = None
    tol: float = EXACT_TOL

    @property
    def activation_count(self) -> int:
        return self.n_act_count + self.abs_act_count

    @property
    def bounds_ok(self) -> bool:
        return (self.linear_layer_count <= linear_bound(self.k)
                and self.activation_count <= activation_bound(self.k))

    @property
    def spectral_ok(self) -> bool:
        return self.max_spectral_norm <= 1.0 + NORM_TOL

    @property
    def exact(self) -> bool:
        tails = self.tail_error is None or self.tail_error <= self.tol * TAIL_PROBE
        return self.max_abs_error <= self.tol and tails

    @property
    def passed(self) -> bool:
        return self.exact and self.bounds_ok and self.spectral_ok

    def to_json(self) -> dict:
        out = asdict(self)
        out.update(activation_count=self.activation_count, bounds_ok=self.bounds_ok,
                   spectral_ok=self.spectral_ok, exact=self.exact, passed=self.passed,
                   linear_bound=linear_bound(self.k), activation_bound=activation_bound(self.k))
        return out


def default_probe_range(f: CpwlFunction) -> tuple[float, float]:
    r = max((abs(v) for v in f.breakpoints), default=0.0) + 10.0
    return -r, r


def verify_compiled(net: Network, f: CpwlFunction, lo: float | None = None,
                    hi: float | None = None, check_tails: bool = True,
                    tol: float = EXACT_TOL) -> CompileReport:
    """Compare ``net`` with ``f`` on the probe set and count its stages.

    Without explicit bounds the probe range is ``+-(max|breakpoint| + 10)``.
    With ``check_tails`` the values at ``+-1e6`` and one unit inside are
    compared as well, which catches wrong tail slopes.
    """
    dlo, dhi = default_probe_range(f)
    lo = dlo if lo is None else float(lo)
    hi = dhi if hi is None else float(hi)
    fn = net.as_function()
    err = cpwl_max_abs_diff(f, fn, lo, hi)
    tail_err = None
    if check_tails:
        xs = np.array([-TAIL_PROBE, 1.0 - TAIL_PROBE, TAIL_PROBE - 1.0, TAIL_PROBE])
        tail_err = float(np.max(np.abs(f(xs) - fn(xs))))
    n_lin = 0
    n_n = n_abs = 0
    norm = 0.0
    for layer in net.layers:
        if isinstance(layer, Dense):
            n_lin += 1
            norm = max(norm, float(np.linalg.norm(layer.p.P, 2)))
        else:
            a, b = layer.nonlinear_counts()
            n_n += a
            n_abs += b
    return CompileReport(f.k, n_lin, n_n, n_abs, err, len(cpwl_probe_points(f, lo, hi)),
                         norm, tail_err, tol)


def long_range_slope(fn, x0: float, delta: float) -> float:
    """Average slope ``|fn(x0 + delta/2) - fn(x0 - delta/2)| / delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return abs(float(fn(x0 + delta / 2)) - float(fn(x0 - delta / 2))) / delta


def witness_bound(c: float) -> float:
    """Long-range slope ceiling for Abs/MaxMin networks whose first active weight is ``>= c``."""
    if not 0 <= c <= 1:
        raise ValueError("c must lie in [0, 1]")
    return math.sqrt(1.0 - c * c)
