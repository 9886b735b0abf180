import math

import numpy as np
import pytest

from nactnet.layers import (
    DenseParams,
    LayerKind,
    PowerIterState,
    aol_diag,
    aol_forward,
    aol_weight,
    cpl_forward,
    effective_bound,
    init_dense,
    layer_forward,
    layer_vjp,
    lipschitz_audit,
    skew,
    soc_forward,
    soc_matrix,
    spectral_norm,
)


def test_aol_diag_examples():
    assert np.array_equal(aol_diag(np.eye(4)), np.ones(4))
    P = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert np.allclose(aol_diag(P), [0.5, 0.5])
    assert np.linalg.norm(aol_weight(P), 2) == pytest.approx(1.0, abs=1e-15)
    assert np.array_equal(aol_diag(np.array([[1.0, 0.0], [0.0, 0.0]])), [1.0, 1.0])


def test_aol_forward_examples():
    x = np.array([0.3, -2.0])
    assert np.allclose(aol_forward(DenseParams(np.eye(2), [0, 0]), x), x)
    P = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert np.allclose(aol_forward(DenseParams(P, [0, 0]), [1.0, 1.0]), [1.0, 1.0])
    assert np.allclose(aol_forward(DenseParams(np.zeros((2, 2)), [1, 0]), x), [1.0, 0.0])


def test_aol_norm_random(rng):
    for _ in range(200):
        m, n = rng.integers(1, 33, 2)
        P = rng.standard_normal((m, n)) * rng.uniform(0.01, 10)
        assert np.linalg.norm(aol_weight(P), 2) <= 1 + 1e-9


def test_dense_params_validation():
    with pytest.raises(ValueError):
        DenseParams(np.zeros((2, 3)), np.zeros(2), LayerKind.SOC)
    with pytest.raises(ValueError):
        DenseParams(np.zeros((2, 3)), np.zeros(3))
    cpl = DenseParams(np.zeros((5, 3)), np.zeros(5), "cpl")
    assert (cpl.in_dim, cpl.out_dim) == (3, 3)
    assert DenseParams(np.asfortranarray(np.ones((3, 2))), np.zeros(3)).P.flags.c_contiguous


def test_spectral_norm_examples():
    assert spectral_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0, abs=1e-9)
    assert spectral_norm(np.array([[0.0, 1.0], [0.0, 0.0]])) == pytest.approx(1.0, abs=1e-9)
    assert spectral_norm(np.eye(8)) == pytest.approx(1.0, abs=1e-12)
    assert spectral_norm(np.zeros((3, 3))) == 0.0


def test_spectral_norm_warm_start(rng):
    P = rng.standard_normal((6, 6))
    state = PowerIterState()
    s1 = spectral_norm(P, state)
    assert s1 == pytest.approx(np.linalg.norm(P, 2), rel=1e-8)
    cold_steps = state.steps
    spectral_norm(P, state)
    assert state.steps < cold_steps
    assert state.residual < 1e-4
    assert np.linalg.norm(state.u) == pytest.approx(1.0)


def test_cpl_examples():
    p = DenseParams(np.eye(2), [0, 0], "cpl")
    assert np.allclose(cpl_forward(p, [1.0, -1.0]), [-1.0, -1.0])
    assert np.allclose(cpl_forward(DenseParams(np.zeros((2, 2)), [0, 0], "cpl"), [1.0, 2.0]), [1, 2])
    far = DenseParams(np.eye(2), [-100, -100], "cpl")
    assert np.allclose(cpl_forward(far, [1.0, 2.0]), [1.0, 2.0])


def test_soc_examples(rng):
    x = rng.standard_normal(3)
    assert np.allclose(soc_forward(DenseParams(np.zeros((3, 3)), np.zeros(3), "soc"), x, 7), x)
    P = rng.standard_normal((3, 3))
    A = skew(P)
    assert np.allclose(soc_forward(DenseParams(P, np.zeros(3), "soc"), x, 1), x + A @ x)
    a = math.pi / 2
    rot = DenseParams(np.array([[0, a], [-a, 0]]), [0, 0], "soc")
    assert np.allclose(soc_forward(rot, [1.0, 0.0], 40), [0.0, -1.0], atol=1e-9, rtol=0)
    with pytest.raises(ValueError):
        soc_forward(rot, [1.0, 0.0], 0)


def test_soc_norm_preserving(rng):
    for _ in range(50):
        n = int(rng.integers(2, 9))
        p = DenseParams(rng.standard_normal((n, n)), np.zeros(n), "soc")
        x = rng.standard_normal(n)
        assert np.linalg.norm(soc_forward(p, x, 40)) == pytest.approx(np.linalg.norm(x), abs=1e-9)


def _fd_check(params, x, U, sigma=None, terms=None, h=1e-6):
    def loss(p):
        y = layer_forward(p, x, sigma=sigma, terms=terms)
        return float(np.sum(U * y))

    dx, dP, db = layer_vjp(params, x, U, sigma=sigma, terms=terms)
    num_x = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        num_x[i] = (np.sum(U * layer_forward(params, xp, sigma=sigma, terms=terms))
                    - np.sum(U * layer_forward(params, xm, sigma=sigma, terms=terms))) / (2 * h)
    num_P = np.zeros_like(params.P)
    for i in np.ndindex(params.P.shape):
        o = params.P[i]
        params.P[i] = o + h
        lp = loss(params)
        params.P[i] = o - h
        lm = loss(params)
        params.P[i] = o
        num_P[i] = (lp - lm) / (2 * h)
    num_b = np.zeros_like(params.b)
    for i in range(params.b.size):
        o = params.b[i]
        params.b[i] = o + h
        lp = loss(params)
        params.b[i] = o - h
        lm = loss(params)
        params.b[i] = o
        num_b[i] = (lp - lm) / (2 * h)
    for a, n in [(dx, num_x), (dP, num_P), (db, num_b)]:
        assert np.allclose(a, n, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("kind", ["aol", "linear", "soc", "cpl"])
def test_vjp_finite_differences(kind, rng):
    for _ in range(5):
        P = rng.standard_normal((4, 4))
        p = DenseParams(P, rng.standard_normal(4) * 0.3, kind)
        X = rng.standard_normal((3, 4))
        U = rng.standard_normal((3, 4))
        sigma = spectral_norm(P) if kind == "cpl" else None
        if kind == "cpl" and np.min(np.abs(X @ P.T + p.b)) < 1e-4:
            continue
        _fd_check(p, X, U, sigma=sigma, terms=6 if kind == "soc" else None)


def test_vjp_examples():
    p = DenseParams(np.eye(3), np.zeros(3), "aol")
    dx, _, db = layer_vjp(p, np.ones(3), [1.0, 0, 0])
    assert np.linalg.norm(dx) <= 1.0
    assert np.array_equal(db, [1.0, 0, 0])
    with pytest.raises(ValueError):
        layer_vjp(p, np.ones(3), [1.0, 0])


def test_audits(rng):
    for _ in range(20):
        P = rng.standard_normal((5, 4))
        assert lipschitz_audit(DenseParams(P, np.zeros(5), "aol"), 200, rng).ratio <= 1 + 1e-9
        C = DenseParams(rng.standard_normal((6, 4)), rng.standard_normal(6), "cpl")
        assert lipschitz_audit(C, 200, rng).ratio <= 1 + 1e-6
    W = np.diag([2.0, 0.5, 0.1])
    a = lipschitz_audit(DenseParams(W, np.zeros(3), "linear"), 2000, rng)
    assert 1.5 < a.ratio <= 2.0 + 1e-12
    assert a.bound == pytest.approx(2.0)
    with pytest.raises(ValueError):
        lipschitz_audit(DenseParams(W, np.zeros(3), "linear"), 0, rng)


def test_effective_bound():
    assert effective_bound(DenseParams(np.ones((2, 2)), [0, 0], "aol")) == pytest.approx(1.0)
    assert effective_bound(DenseParams(np.ones((2, 2)), [0, 0], "cpl")) is None


@pytest.mark.parametrize("kind", list(LayerKind))
def test_init_dense_shapes(kind, rng):
    d_out = 4 if kind in (LayerKind.SOC, LayerKind.CPL) else 5
    p = init_dense(kind, 4, d_out, rng)
    assert p.in_dim == 4
    if kind in (LayerKind.AOL, LayerKind.CPL):
        assert effective_bound(DenseParams(p.P, p.b, "aol")) <= 1 + 1e-12
