"""Compare the compiled and numpy N-activation kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]
"""

import argparse
import json
import sys
import timeit

import numpy as np

from nactnet import kernels

SHAPES = [(256, 32), (256, 512), (4096, 64), (100, 40)]


def bench(backend, x, tmin, tmax, up, repeat):
    _, branch = backend.nact_forward(x, tmin, tmax)
    fwd = min(timeit.repeat(lambda: backend.nact_forward(x, tmin, tmax), number=20, repeat=repeat)) / 20
    bwd = min(timeit.repeat(lambda: backend.nact_backward(up, branch), number=20, repeat=repeat)) / 20
    return fwd, bwd


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`",
              file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'shape':>12} {'py fwd us':>10} {'cy fwd us':>10} {'x':>6} {'py bwd us':>10} {'cy bwd us':>10} {'x':>6}")
    for n, c in SHAPES:
        x = rng.standard_normal((n, c))
        tmin = -rng.uniform(0, 1, c)
        tmax = rng.uniform(0, 1, c)
        tmin[::2] = -np.inf
        up = rng.standard_normal((n, c))
        py = bench(kernels.python_backend, x, tmin, tmax, up, args.repeat)
        cy = bench(kernels.compiled_backend, x, tmin, tmax, up, args.repeat)
        row = {"batch": n, "channels": c, "python_forward_s": py[0], "cython_forward_s": cy[0],
               "python_backward_s": py[1], "cython_backward_s": cy[1]}
        rows.append(row)
        print(f"{f'{n}x{c}':>12} {py[0]*1e6:10.1f} {cy[0]*1e6:10.1f} {py[0]/cy[0]:6.1f}"
              f" {py[1]*1e6:10.1f} {cy[1]*1e6:10.1f} {py[1]/cy[1]:6.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
