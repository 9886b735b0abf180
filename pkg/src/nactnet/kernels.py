"""Backend selection for the N-activation kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is loaded.  Set ``NACTNET_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py as python_backend

compiled_backend = None
if not os.environ.get("NACTNET_PURE_PYTHON"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND_NAME = "cython" if compiled_backend is not None else "python"


def _c(a, dtype=np.float64):
    return np.ascontiguousarray(a, dtype=dtype)


def nact_forward(x, tmin, tmax):
    """Returns ``(y, branch)`` for a (batch, channel) input."""
    return backend.nact_forward(_c(x), _c(tmin), _c(tmax))


def nact_backward(up, branch):
    """Returns ``(dx, d_tmin, d_tmax)``; parameter gradients are batch sums."""
    return backend.nact_backward(_c(up), _c(branch, np.int8))
