"""Exact 1-Lipschitz continuous piecewise-linear scalar functions.

A :class:`CpwlFunction` is stored as its sorted breakpoints, one slope per
segment and a single anchor point.  Values at the breakpoints are accumulated
outward from the anchor, which makes evaluation continuous by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

SLOPE_MERGE_TOL = 1e-12
DEFAULT_MAX_K = 1000


class CpwlError(ValueError):
    """Raised for inputs that do not describe a valid 1-CPWL function."""


class NonFiniteOutputError(ArithmeticError):
    """A compared function produced NaN or infinite values."""


@dataclass(frozen=True)
class CpwlFunction:
    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    anchor: tuple[float, float]
    _values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_values", _breakpoint_values(self))
        self._values.setflags(write=False)

    @property
    def k(self) -> int:
        """Number of non-linearities."""
        return len(self.breakpoints)

    @property
    def breakpoint_values(self) -> np.ndarray:
        return self._values

    def __call__(self, x):
        return cpwl_eval(self, x)

    def to_json(self) -> dict:
        return {
            "breakpoints": list(self.breakpoints),
            "slopes": list(self.slopes),
            "anchor": list(self.anchor),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CpwlFunction":
        try:
            return cpwl_new(obj["breakpoints"], obj["slopes"], tuple(obj["anchor"]))
        except (KeyError, TypeError) as exc:
            raise CpwlError(f"malformed function JSON: {exc}") from exc


def _breakpoint_values(f: CpwlFunction) -> np.ndarray:
    t = np.asarray(f.breakpoints, dtype=np.float64)
    s = np.asarray(f.slopes, dtype=np.float64)
    x0, y0 = f.anchor
    if t.size == 0:
        return t
    # segment j spans (t[j-1], t[j]); the anchor sits in segment `a`
    a = int(np.searchsorted(t, x0, side="right"))
    vals = np.empty_like(t)
    if a < t.size:
        vals[a] = y0 + s[a] * (t[a] - x0)
        for j in range(a + 1, t.size):
            vals[j] = vals[j - 1] + s[j] * (t[j] - t[j - 1])
    if a > 0:
        vals[a - 1] = y0 - s[a] * (x0 - t[a - 1])
        for j in range(a - 2, -1, -1):
            vals[j] = vals[j + 1] - s[j + 1] * (t[j + 1] - t[j])
    return vals


def cpwl_new(breakpoints: Sequence[float], slopes: Sequence[float],
             anchor: tuple[float, float]) -> CpwlFunction:
    """Validate and normalise a 1-CPWL description.

    Adjacent slopes closer than ``SLOPE_MERGE_TOL`` are merged and the breakpoint
    between them dropped, so ``k`` always equals the true number of
    non-linearities.
    """
    t = [float(v) for v in breakpoints]
    s = [float(v) for v in slopes]
    if len(anchor) != 2:
        raise CpwlError("anchor must be a pair (x0, f(x0))")
    x0, y0 = float(anchor[0]), float(anchor[1])
    if len(s) != len(t) + 1:
        raise CpwlError(
            f"need exactly one more slope than breakpoints, got {len(s)} and {len(t)}")
    if not all(math.isfinite(v) for v in (*t, *s, x0, y0)):
        raise CpwlError("breakpoints, slopes and anchor must be finite")
    if any(b <= a for a, b in zip(t, t[1:])):
        raise CpwlError("breakpoints must be strictly increasing")
    bad = [v for v in s if abs(v) > 1.0]
    if bad:
        raise CpwlError(f"slopes must satisfy |s| <= 1, got {bad[0]!r}")

    kept_t: list[float] = []
    kept_s = [s[0]]
    for tb, sb in zip(t, s[1:]):
        if abs(sb - kept_s[-1]) <= SLOPE_MERGE_TOL:
            continue
        kept_t.append(tb)
        kept_s.append(sb)
    return CpwlFunction(tuple(kept_t), tuple(kept_s), (x0, y0))


def cpwl_eval(f: CpwlFunction, x):
    """Evaluate ``f`` at a scalar or array ``x``."""
    xa = np.asarray(x, dtype=np.float64)
    t = np.asarray(f.breakpoints, dtype=np.float64)
    s = np.asarray(f.slopes, dtype=np.float64)
    if t.size == 0:
        x0, y0 = f.anchor
        out = y0 + s[0] * (xa - x0)
    else:
        seg = np.searchsorted(t, xa, side="right")
        ref = np.maximum(seg - 1, 0)
        out = f.breakpoint_values[ref] + s[seg] * (xa - t[ref])
    return float(out) if np.ndim(out) == 0 else out


def n_function() -> CpwlFunction:
    """The three-segment function with slopes +1, -1, +1 and kinks at -1/2, 1/2."""
    return cpwl_new([-0.5, 0.5], [1.0, -1.0, 1.0], (0.0, 0.0))


def identity() -> CpwlFunction:
    return cpwl_new([], [1.0], (0.0, 0.0))


def cpwl_extremes(f: CpwlFunction) -> list[tuple[float, str]]:
    """Local extreme points as ``(x, "max" | "min")`` pairs, left to right.

    Zero slopes are skipped when looking for a sign change, so a plateau between
    a rising and a falling segment yields a single extremum at the plateau's
    left edge; a plateau between two segments of equal sign is no extremum.
    """
    out = []
    last_sign = 0
    last_idx = -1
    for i, sl in enumerate(f.slopes):
        sign = (sl > 0) - (sl < 0)
        if sign == 0:
            continue
        if last_sign and sign != last_sign:
            # breakpoint right after the last nonzero slope before the flip
            out.append((f.breakpoints[last_idx], "max" if last_sign > 0 else "min"))
        last_sign = sign
        last_idx = i
    return out


def cpwl_probe_points(f: CpwlFunction, lo: float, hi: float, grid: int = 1001) -> np.ndarray:
    t = np.asarray(f.breakpoints, dtype=np.float64)
    inner = t[(t >= lo) & (t <= hi)]
    knots = np.unique(np.concatenate([[lo], inner, [hi]]))
    mids = 0.5 * (knots[1:] + knots[:-1])
    return np.unique(np.concatenate([knots, mids, np.linspace(lo, hi, grid)]))


def cpwl_max_abs_diff(f: CpwlFunction, g: Callable, lo: float, hi: float) -> float:
    """Max of ``|f(x) - g(x)|`` over breakpoints, midpoints, ends and a grid on [lo, hi].

    ``g`` is called on the whole probe array; callables that only accept
    scalars are applied pointwise.
    """
    if not lo < hi:
        raise CpwlError(f"need lo < hi, got [{lo}, {hi}]")
    xs = cpwl_probe_points(f, lo, hi)
    try:
        gv = np.asarray(g(xs), dtype=np.float64).reshape(-1)
        if gv.shape != xs.shape:
            raise ValueError
    except (TypeError, ValueError):
        gv = np.array([float(g(float(v))) for v in xs])
    if not np.all(np.isfinite(gv)):
        bad = xs[~np.isfinite(gv)][0]
        raise NonFiniteOutputError(f"compared function is not finite at x={bad!r}")
    return float(np.max(np.abs(cpwl_eval(f, xs) - gv)))


def cpwl_random(k: int, lo: float, hi: float, rng: np.random.Generator,
                max_k: int = DEFAULT_MAX_K) -> CpwlFunction:
    """Random 1-CPWL function with exactly ``k`` breakpoints in [lo, hi]."""
    if k < 0:
        raise CpwlError("k must be non-negative")
    if k > max_k:
        raise CpwlError(f"k={k} exceeds the configured cap max_k={max_k}")
    if not lo < hi:
        raise CpwlError(f"need lo < hi, got [{lo}, {hi}]")
    t = np.sort(rng.uniform(lo, hi, size=k))
    while k > 1 and np.any(np.diff(t) <= 0):
        t = np.sort(rng.uniform(lo, hi, size=k))
    s = rng.uniform(-1.0, 1.0, size=k + 1)
    for i in range(1, k + 1):
        while abs(s[i] - s[i - 1]) <= 1e3 * SLOPE_MERGE_TOL:
            s[i] = rng.uniform(-1.0, 1.0)
    anchor = (0.5 * (lo + hi), float(rng.uniform(-1.0, 1.0)))
    return cpwl_new(t.tolist(), s.tolist(), anchor)


def load_function(path: str | Path) -> CpwlFunction:
    with open(path) as fh:
        return CpwlFunction.from_json(json.load(fh))


def save_function(f: CpwlFunction, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(f.to_json(), fh, indent=2)
