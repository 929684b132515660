"""Pure-numpy LSTM sequence kernels; the fallback backend.

Fused gate layout: W has shape (4H, I+H), bias (4H,), gate order
[input, forget, candidate, output]. The cache is (cat, gates, c, ct) with
cat the per-step [x_t, h_prev] rows and gates post-activation.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(W: np.ndarray, b: np.ndarray, X: np.ndarray, hidden: int):
    steps = X.shape[0]
    in_dim = X.shape[1]
    H = np.zeros((steps, hidden))
    cat = np.zeros((steps, in_dim + hidden))
    gates = np.zeros((steps, 4 * hidden))
    c = np.zeros((steps, hidden))
    ct = np.zeros((steps, hidden))

    h_prev = np.zeros(hidden)
    c_prev = np.zeros(hidden)
    for t in range(steps):
        cat[t, :in_dim] = X[t]
        cat[t, in_dim:] = h_prev
        z = W @ cat[t] + b
        i = _sigmoid(z[:hidden])
        f = _sigmoid(z[hidden : 2 * hidden])
        g = np.tanh(z[2 * hidden : 3 * hidden])
        o = _sigmoid(z[3 * hidden :])
        gates[t, :hidden] = i
        gates[t, hidden : 2 * hidden] = f
        gates[t, 2 * hidden : 3 * hidden] = g
        gates[t, 3 * hidden :] = o
        c[t] = f * c_prev + i * g
        ct[t] = np.tanh(c[t])
        H[t] = o * ct[t]
        h_prev = H[t]
        c_prev = c[t]

    return H, (cat, gates, c, ct)


def lstm_forward_batch(W: np.ndarray, b: np.ndarray, X: np.ndarray, hidden: int):
    """Batched sequences: X (B, T, I) -> H (B, T, hidden), shared weights."""
    batch, steps, in_dim = X.shape
    H = np.zeros((batch, steps, hidden))
    cat = np.zeros((batch, steps, in_dim + hidden))
    gates = np.zeros((batch, steps, 4 * hidden))
    c = np.zeros((batch, steps, hidden))
    ct = np.zeros((batch, steps, hidden))

    h_prev = np.zeros((batch, hidden))
    c_prev = np.zeros((batch, hidden))
    for t in range(steps):
        cat[:, t, :in_dim] = X[:, t]
        cat[:, t, in_dim:] = h_prev
        z = cat[:, t] @ W.T + b
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden : 2 * hidden])
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = _sigmoid(z[:, 3 * hidden :])
        gates[:, t, :hidden] = i
        gates[:, t, hidden : 2 * hidden] = f
        gates[:, t, 2 * hidden : 3 * hidden] = g
        gates[:, t, 3 * hidden :] = o
        c[:, t] = f * c_prev + i * g
        ct[:, t] = np.tanh(c[:, t])
        H[:, t] = o * ct[:, t]
        h_prev = H[:, t]
        c_prev = c[:, t]

    return H, (cat, gates, c, ct)


def lstm_backward_batch(W: np.ndarray, cache, dH: np.ndarray, hidden: int):
    cat, gates, c, ct = cache
    batch, steps, total = cat.shape
    in_dim = total - hidden

    dW = np.zeros_like(W)
    db = np.zeros(4 * hidden)
    dX = np.zeros((batch, steps, in_dim))

    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        i = gates[:, t, :hidden]
        f = gates[:, t, hidden : 2 * hidden]
        g = gates[:, t, 2 * hidden : 3 * hidden]
        o = gates[:, t, 3 * hidden :]
        c_prev = c[:, t - 1] if t > 0 else np.zeros((batch, hidden))

        dh = dH[:, t] + dh_next
        do = dh * ct[:, t]
        dc = dh * o * (1.0 - ct[:, t] * ct[:, t]) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f

        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dW += dz.T @ cat[:, t]
        db += dz.sum(axis=0)
        dcat = dz @ W
        dX[:, t] = dcat[:, :in_dim]
        dh_next = dcat[:, in_dim:]

    return dW, db, dX


def lstm_backward(W: np.ndarray, cache, dH: np.ndarray, hidden: int):
    cat, gates, c, ct = cache
    steps = cat.shape[0]
    in_dim = cat.shape[1] - hidden

    dW = np.zeros_like(W)
    db = np.zeros(4 * hidden)
    dX = np.zeros((steps, in_dim))

    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)
    for t in range(steps - 1, -1, -1):
        i = gates[t, :hidden]
        f = gates[t, hidden : 2 * hidden]
        g = gates[t, 2 * hidden : 3 * hidden]
        o = gates[t, 3 * hidden :]
        c_prev = c[t - 1] if t > 0 else np.zeros(hidden)

        dh = dH[t] + dh_next
        do = dh * ct[t]
        dc = dh * o * (1.0 - ct[t] * ct[t]) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f

        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ]
        )
        dW += np.outer(dz, cat[t])
        db += dz
        dcat = W.T @ dz
        dX[t] = dcat[:in_dim]
        dh_next = dcat[in_dim:]

    return dW, db, dX
