"""Pure numpy N-activation kernels; same contract as the compiled ``_kernels``.

Branch codes: 0 left of ``tmin``, 1 middle, 2 at or right of ``tmax``.
"""

import numpy as np


def nact_forward(x, tmin, tmax):
    x = np.ascontiguousarray(x, dtype=np.float64)
    branch = np.where(x >= tmax, 2, np.where(x >= tmin, 1, 0)).astype(np.int8)
    y = np.where(branch == 2, x - 2.0 * tmax, np.where(branch == 1, -x, x - 2.0 * tmin))
    return y, branch


def nact_backward(up, branch):
    up = np.asarray(up, dtype=np.float64)
    mid = branch == 1
    dx = np.where(mid, -up, up)
    dtmin = -2.0 * np.where(branch == 0, up, 0.0).sum(axis=0)
    dtmax = -2.0 * np.where(branch == 2, up, 0.0).sum(axis=0)
    return dx, dtmin, dtmax
