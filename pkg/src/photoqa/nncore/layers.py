"""Layer primitives built on the tape: dense, LSTM, masked softmax losses.

lstm_run is a fused tape op backed by the selected kernel backend; lstm_step
is the same recurrence spelled out in primitive ops (slower, used for
cross-checking the kernels and for single-step callers).
"""

from __future__ import annotations

import numpy as np

from . import kernels
from . import tape
from .params import ParamStore, xavier_limit
from .tape import Tensor

ACTIVATIONS = ("linear", "relu", "tanh", "sigmoid")


def dense(x: Tensor, W: Tensor, b: Tensor, activation: str = "linear") -> Tensor:
    if W.value.shape[1] != x.value.shape[0]:
        raise ValueError(
            f"dense shape mismatch: W {W.value.shape} vs x {x.value.shape}"
        )
    y = tape.add(tape.matvec(W, x), b)
    if activation == "linear":
        return y
    if activation == "relu":
        return tape.relu(y)
    if activation == "tanh":
        return tape.tanh(y)
    if activation == "sigmoid":
        return tape.sigmoid(y)
    raise ValueError(f"unknown activation '{activation}'")


class LstmCellParams:
    """Fused-gate LSTM parameters: W (4H, I+H), b (4H,), gate order i,f,g,o.

    The forget-gate bias block is initialized to 1.0.
    """

    def __init__(self, store: ParamStore, prefix: str, input_dim: int, hidden_dim: int):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.prefix = prefix
        fan = (input_dim + hidden_dim, hidden_dim)
        self.W = store.add(f"{prefix}_W", (4 * hidden_dim, input_dim + hidden_dim), fan=fan)
        self.b = store.add(f"{prefix}_b", (4 * hidden_dim,), init="zeros")
        self.b.value[hidden_dim : 2 * hidden_dim] = 1.0
        self._store = store

    def leaves(self) -> tuple[Tensor, Tensor]:
        return self._store.leaf(f"{self.prefix}_W"), self._store.leaf(f"{self.prefix}_b")


def lstm_run(W: Tensor, b: Tensor, X: Tensor, hidden: int) -> Tensor:
    """Run the LSTM over a (T, I) input matrix; returns all h_t as (T, H)."""
    steps = X.value.shape[0]
    if steps == 0:
        return tape.leaf(np.zeros((0, hidden)))
    if W.value.shape != (4 * hidden, X.value.shape[1] + hidden):
        raise ValueError(
            f"lstm shape mismatch: W {W.value.shape} vs input dim {X.value.shape[1]}"
        )
    X_c = np.ascontiguousarray(X.value)
    H, cache = kernels.lstm_forward(W.value, b.value, X_c, hidden)
    out = Tensor(H, (W, b, X))

    def bwd(g):
        dW, db, dX = kernels.lstm_backward(W.value, cache, np.ascontiguousarray(g), hidden)
        tape._acc_owned(W, dW)
        tape._acc_owned(b, db)
        tape._acc_owned(X, dX)

    out.bwd = bwd
    return out


def lstm_run_batch(W: Tensor, b: Tensor, X: Tensor, hidden: int) -> Tensor:
    """Shared-weight LSTM over a (B, T, I) batch of sequences -> (B, T, H)."""
    if X.value.ndim != 3:
        raise ValueError("lstm_run_batch expects a (B, T, I) input")
    X_c = np.ascontiguousarray(X.value)
    H, cache = kernels.lstm_forward_batch(W.value, b.value, X_c, hidden)
    out = Tensor(H, (W, b, X))

    def bwd(g):
        dW, db, dX = kernels.lstm_backward_batch(
            W.value, cache, np.ascontiguousarray(g), hidden
        )
        tape._acc_owned(W, dW)
        tape._acc_owned(b, db)
        tape._acc_owned(X, dX)

    out.bwd = bwd
    return out


def lstm_final(W: Tensor, b: Tensor, X: Tensor, hidden: int) -> Tensor:
    """Final hidden state; zero vector for an empty sequence."""
    if X.value.shape[0] == 0:
        return tape.leaf(np.zeros(hidden))
    H = lstm_run(W, b, X, hidden)
    return tape.row(H, X.value.shape[0] - 1)


def lstm_step(
    W: Tensor, b: Tensor, x_t: Tensor, h_prev: Tensor, c_prev: Tensor, hidden: int
) -> tuple[Tensor, Tensor]:
    """One recurrence step in primitive tape ops."""
    z = tape.add(tape.matvec(W, tape.concat([x_t, h_prev])), b)
    i = tape.sigmoid(tape.slice1d(z, 0, hidden))
    f = tape.sigmoid(tape.slice1d(z, hidden, 2 * hidden))
    g = tape.tanh(tape.slice1d(z, 2 * hidden, 3 * hidden))
    o = tape.sigmoid(tape.slice1d(z, 3 * hidden, 4 * hidden))
    c = tape.add(tape.mul(f, c_prev), tape.mul(i, g))
    h = tape.mul(o, tape.tanh(c))
    return h, c


def masked_softmax_ce(logits: Tensor, mask, target: int) -> Tensor:
    """Softmax cross-entropy over masked-in entries only.

    Gradients are exactly zero at masked-out positions. The target must be
    masked in and the mask must keep at least two entries.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.value.shape:
        raise ValueError("mask shape must match logits")
    idxs = np.flatnonzero(mask)
    if len(idxs) < 2:
        raise ValueError("mask must select at least 2 entries")
    if not mask[target]:
        raise ValueError(f"target {target} is masked out")
    pos = int(np.searchsorted(idxs, target))
    return tape.cross_entropy(tape.gather(logits, idxs), pos)


def init_dense(store: ParamStore, prefix: str, in_dim: int, out_dim: int):
    W = store.add(f"{prefix}_W", (out_dim, in_dim), fan=(in_dim, out_dim))
    b = store.add(f"{prefix}_b", (out_dim,), init="zeros")
    return W, b


__all__ = [
    "ACTIVATIONS",
    "LstmCellParams",
    "dense",
    "init_dense",
    "lstm_final",
    "lstm_run",
    "lstm_step",
    "masked_softmax_ce",
    "xavier_limit",
]
