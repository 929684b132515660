import importlib

import numpy as np
import pytest

from photoqa.nncore import kernels
from photoqa.nncore.kernels import lstm_py


def _has_cython():
    try:
        importlib.import_module("photoqa.nncore.kernels._lstm_cy")
        return True
    except ImportError:
        return False


def _random_case(seed, steps=7, in_dim=5, hidden=4):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((4 * hidden, in_dim + hidden))
    b = rng.standard_normal(4 * hidden)
    X = rng.standard_normal((steps, in_dim))
    dH = rng.standard_normal((steps, hidden))
    return W, b, X, dH, hidden


@pytest.mark.skipif(not _has_cython(), reason="compiled kernel not built")
def test_backends_agree():
    cy = importlib.import_module("photoqa.nncore.kernels._lstm_cy")
    for seed in range(5):
        W, b, X, dH, hidden = _random_case(seed)
        H1, cache1 = lstm_py.lstm_forward(W, b, X, hidden)
        H2, cache2 = cy.lstm_forward(W, b, X, hidden)
        np.testing.assert_allclose(H1, H2, rtol=1e-12, atol=1e-14)
        g1 = lstm_py.lstm_backward(W, cache1, dH, hidden)
        g2 = cy.lstm_backward(W, cache2, dH, hidden)
        for a, bb in zip(g1, g2):
            np.testing.assert_allclose(a, bb, rtol=1e-12, atol=1e-14)


def test_active_backend_matches_numpy_reference():
    W, b, X, dH, hidden = _random_case(99)
    H_ref, cache_ref = lstm_py.lstm_forward(W, b, X, hidden)
    H, cache = kernels.lstm_forward(W, b, X, hidden)
    np.testing.assert_allclose(H, H_ref, rtol=1e-12, atol=1e-14)
    g_ref = lstm_py.lstm_backward(W, cache_ref, dH, hidden)
    g = kernels.lstm_backward(W, cache, dH, hidden)
    for a, bb in zip(g, g_ref):
        np.testing.assert_allclose(a, bb, rtol=1e-12, atol=1e-14)


def test_numpy_backward_matches_finite_differences():
    W, b, X, dH, hidden = _random_case(3, steps=4, in_dim=3, hidden=3)

    def loss(Wv, bv, Xv):
        H, _ = lstm_py.lstm_forward(Wv, bv, Xv, hidden)
        return float(np.sum(H * dH))

    _, cache = lstm_py.lstm_forward(W, b, X, hidden)
    dW, db, dX = lstm_py.lstm_backward(W, cache, dH, hidden)
    h = 1e-6
    rng = np.random.default_rng(0)
    for arr, grad in ((W, dW), (b, db), (X, dX)):
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in rng.choice(flat.size, size=min(8, flat.size), replace=False):
            orig = flat[idx]
            flat[idx] = orig + h
            plus = loss(W, b, X)
            flat[idx] = orig - h
            minus = loss(W, b, X)
            flat[idx] = orig
            numeric = (plus - minus) / (2 * h)
            assert abs(numeric - gflat[idx]) <= 1e-5 * max(1.0, abs(gflat[idx]))
