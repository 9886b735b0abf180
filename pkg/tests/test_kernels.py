import numpy as np
import pytest

from nactnet import kernels

pytestmark = pytest.mark.skipif(kernels.compiled_backend is None,
                                reason="compiled extension not built")


def _case(rng, n=64, c=9):
    x = rng.standard_normal((n, c)) * 2
    tmin = -rng.uniform(0, 1, c)
    tmax = rng.uniform(0, 1, c)
    tmin[::3] = -np.inf
    x[0, :] = tmax  # exactly on the upper kink
    lower = np.isfinite(tmin)
    x[1, lower] = tmin[lower]
    return x, tmin, tmax


def test_forward_parity(rng):
    x, tmin, tmax = _case(rng)
    y_py, b_py = kernels.python_backend.nact_forward(x, tmin, tmax)
    y_cy, b_cy = kernels.compiled_backend.nact_forward(x, tmin, tmax)
    assert np.array_equal(b_py, b_cy)
    assert np.array_equal(y_py, y_cy)


def test_backward_parity(rng):
    x, tmin, tmax = _case(rng)
    _, branch = kernels.python_backend.nact_forward(x, tmin, tmax)
    up = rng.standard_normal(x.shape)
    py = kernels.python_backend.nact_backward(up, branch)
    cy = kernels.compiled_backend.nact_backward(up, branch)
    assert np.array_equal(py[0], cy[0])
    assert np.allclose(py[1], cy[1], rtol=1e-13, atol=1e-13)
    assert np.allclose(py[2], cy[2], rtol=1e-13, atol=1e-13)


def test_wrapper_accepts_non_contiguous(rng):
    x = rng.standard_normal((10, 6))[:, ::2]
    y, _ = kernels.nact_forward(x, np.zeros(3), np.zeros(3))
    assert np.array_equal(y, x)


def test_branch_codes():
    y, b = kernels.nact_forward(np.array([[-2.0, 0.0, 0.5, 3.0]]),
                                np.full(4, -1.0), np.full(4, 0.5))
    assert b.tolist() == [[0, 1, 2, 2]]
    assert y.tolist() == [[0.0, -0.0, -0.5, 2.0]]
