import math

import numpy as np
import pytest

from nactnet.activations import (
    Kind,
    NActParams,
    maxmin,
    maxmin_as_abs_identity,
    maxmin_grad,
    n_act,
    n_act_grad,
    scalar_act,
    scalar_act_grad,
)
from nactnet.pwl import n_function

N_PARAMS = NActParams(-0.5, 0.5)


def test_params_validation():
    with pytest.raises(ValueError):
        NActParams(float("nan"), 0.0)
    with pytest.raises(ValueError):
        NActParams(0.0, float("inf"), abs_mode=True)
    p = NActParams(-math.inf, 0.0, abs_mode=True)
    assert p.theta_min == -math.inf and p.theta_max == 0.0
    assert NActParams(0.7, -0.2).theta_min == -0.2
    assert not NActParams(0.3, 0.3).is_nonlinear
    assert NActParams(0.0, 0.0, abs_mode=True).is_nonlinear


def test_examples():
    assert n_act(0.0, NActParams(0, 0)) == 0.0
    assert n_act(2.0, N_PARAMS) == 1.0
    assert n_act(-3.0, NActParams(0, 0, abs_mode=True)) == 3.0


def test_identity_and_abs(rng):
    x = rng.uniform(-50, 50, 1000)
    assert np.array_equal(n_act(x, NActParams(0, 0)), x)
    assert np.array_equal(n_act(x, NActParams(0, 0, abs_mode=True)), np.abs(x))
    # the finite stand-in only works on bounded inputs
    assert np.array_equal(n_act(x, NActParams(-100, 0)), np.abs(x))


def test_matches_n_function(rng):
    x = np.concatenate([rng.uniform(-5, 5, 1000), [-0.5, 0.5]])
    assert np.allclose(n_act(x, N_PARAMS), n_function()(x), atol=1e-15, rtol=0)


def test_swapped_thetas_same_values(rng):
    x = rng.uniform(-3, 3, 100)
    assert np.array_equal(n_act(x, NActParams(0.5, -0.5)), n_act(x, N_PARAMS))


def test_grad_examples():
    assert n_act_grad(2.0, N_PARAMS) == (1.0, 0.0, -2.0)
    assert n_act_grad(0.0, N_PARAMS) == (-1.0, 0.0, 0.0)
    assert n_act_grad(-2.0, N_PARAMS) == (1.0, -2.0, 0.0)


def test_grad_right_branch_at_kinks():
    assert n_act_grad(0.5, N_PARAMS) == (1.0, 0.0, -2.0)
    assert n_act_grad(-0.5, N_PARAMS) == (-1.0, 0.0, 0.0)


def test_grad_tie_routing():
    p = NActParams(0.2, 0.2)
    assert n_act_grad(1.0, p) == (1.0, 0.0, -2.0)
    assert n_act_grad(-1.0, p) == (1.0, -2.0, 0.0)
    q = NActParams(0.5, -0.5)
    assert n_act_grad(2.0, q) == (1.0, -2.0, 0.0)


def test_grad_abs_mode():
    p = NActParams(0.0, 0.3, abs_mode=True)
    assert n_act_grad(-4.0, p) == (-1.0, 0.0, 0.0)
    assert n_act_grad(1.0, p) == (1.0, 0.0, -2.0)


def test_grad_matches_finite_differences(rng):
    h = 1e-6
    for _ in range(200):
        t1, t2 = rng.uniform(-2, 2, 2)
        x = rng.uniform(-3, 3)
        if min(abs(x - t1), abs(x - t2)) < 1e-3:
            continue
        dx, d1, d2 = n_act_grad(x, NActParams(t1, t2))
        num = [(n_act(x + h, NActParams(t1, t2)) - n_act(x - h, NActParams(t1, t2))) / (2 * h),
               (n_act(x, NActParams(t1 + h, t2)) - n_act(x, NActParams(t1 - h, t2))) / (2 * h),
               (n_act(x, NActParams(t1, t2 + h)) - n_act(x, NActParams(t1, t2 - h))) / (2 * h)]
        assert np.allclose([dx, d1, d2], num, rtol=1e-5, atol=1e-6)


def test_maxmin_examples():
    assert maxmin(1, 3) == (3, 1)
    assert maxmin(3, 1) == (3, 1)
    assert maxmin(-1, -2) == (-1, -2)
    a, b, c, d = maxmin_grad(np.array([1.0, 3.0, 2.0]), np.array([3.0, 1.0, 2.0]))
    assert a.tolist() == [0, 1, 1] and b.tolist() == [1, 0, 0]
    assert c.tolist() == [1, 0, 0] and d.tolist() == [0, 1, 1]


def test_scalar_acts():
    assert scalar_act(Kind.ABS, -2.0) == 2.0
    assert scalar_act("relu", -2.0) == 0.0
    assert scalar_act("identity", -2.0) == -2.0
    assert scalar_act_grad(Kind.ABS, 0.0) == 1.0
    assert scalar_act_grad(Kind.RELU, 0.0) == 1.0
    assert scalar_act_grad(Kind.RELU, -1e-9) == 0.0
    with pytest.raises(ValueError):
        scalar_act(Kind.MAXMIN, 1.0)


def test_maxmin_decomposition(rng):
    assert maxmin_as_abs_identity(1.0, 3.0) == pytest.approx((3.0, 1.0), abs=1e-15)
    assert maxmin_as_abs_identity(2.5, 2.5) == pytest.approx((2.5, 2.5), abs=1e-15)
    x, y = rng.standard_normal((2, 10_000)) * 10
    a, b = maxmin_as_abs_identity(x, y)
    m, n = maxmin(x, y)
    assert np.max(np.abs(a - m)) <= 1e-12 and np.max(np.abs(b - n)) <= 1e-12


def test_all_activations_one_lipschitz(rng):
    x, y = rng.uniform(-10, 10, (2, 100_000))
    for p in [NActParams(-0.5, 0.5), NActParams(1.3, -0.1), NActParams(0, 2.0, abs_mode=True)]:
        assert np.all(np.abs(n_act(x, p) - n_act(y, p)) <= np.abs(x - y) + 1e-12)
    for kind in ("abs", "relu", "identity"):
        assert np.all(np.abs(scalar_act(kind, x) - scalar_act(kind, y)) <= np.abs(x - y) + 1e-12)
    u, v = rng.uniform(-10, 10, (2, 100_000))
    d_in = np.hypot(x - y, u - v)
    (a1, b1), (a2, b2) = maxmin(x, u), maxmin(y, v)
    assert np.all(np.hypot(a1 - a2, b1 - b2) <= d_in + 1e-12)
