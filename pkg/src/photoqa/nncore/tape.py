"""Minimal reverse-mode autodiff tape over float64 numpy arrays.

Graphs are built per forward pass; backward() walks the tape in reverse
topological order. Gradients accumulate into Tensor.grad, which for shared
parameter leaves aliases the owning Param's grad buffer, so a plain backward
implements fixed-order gradient accumulation across samples.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "parents", "bwd")

    def __init__(self, value: np.ndarray, parents: tuple = (), bwd=None) -> None:
        self.value = value
        self.grad = None
        self.parents = parents
        self.bwd = bwd

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None


def leaf(value) -> Tensor:
    return Tensor(np.asarray(value, dtype=np.float64))


def _acc(t: Tensor, g) -> None:
    """Accumulate a gradient that may be shared or a view; copies on first use."""
    if t.grad is None:
        t.grad = np.array(g)
    else:
        t.grad += g


def _acc_owned(t: Tensor, g) -> None:
    """Accumulate a gradient array owned exclusively by the caller.

    The array is adopted without copying on first use, so callers must pass
    a freshly allocated array they will not touch again.
    """
    if t.grad is None:
        t.grad = g
    else:
        t.grad += g


def backward(root: Tensor, seed: float = 1.0) -> None:
    """Reverse-mode sweep from a scalar root."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    _acc(root, np.asarray(seed, dtype=np.float64))
    for node in reversed(order):
        if node.bwd is not None and node.grad is not None:
            node.bwd(node.grad)


# ---------------------------------------------------------------------------
# Primitive ops

def matvec(W: Tensor, x: Tensor) -> Tensor:
    out = Tensor(W.value @ x.value, (W, x))

    def bwd(g):
        _acc_owned(W, np.outer(g, x.value))
        _acc_owned(x, W.value.T @ g)

    out.bwd = bwd
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value + b.value, (a, b))

    def bwd(g):
        _acc(a, g)
        _acc(b, g)

    out.bwd = bwd
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value * b.value, (a, b))

    def bwd(g):
        _acc_owned(a, g * b.value)
        _acc_owned(b, g * a.value)

    out.bwd = bwd
    return out


def smul(s: Tensor, v: Tensor) -> Tensor:
    """Scalar (0-d tensor) times vector."""
    out = Tensor(s.value * v.value, (s, v))

    def bwd(g):
        _acc_owned(s, np.asarray(np.dot(np.ravel(g), np.ravel(v.value))))
        _acc_owned(v, s.value * g)

    out.bwd = bwd
    return out


def dot(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(np.asarray(np.dot(a.value, b.value)), (a, b))

    def bwd(g):
        _acc_owned(a, g * b.value)
        _acc_owned(b, g * a.value)

    out.bwd = bwd
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.value)
    out = Tensor(y, (x,))

    def bwd(g):
        _acc_owned(x, g * (1.0 - y * y))

    out.bwd = bwd
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.value))
    out = Tensor(y, (x,))

    def bwd(g):
        _acc_owned(x, g * y * (1.0 - y))

    out.bwd = bwd
    return out


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.value, 0.0)
    out = Tensor(y, (x,))

    def bwd(g):
        _acc_owned(x, g * (x.value > 0.0))

    out.bwd = bwd
    return out


def concat(parts: list[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.value for p in parts]), tuple(parts))
    sizes = [p.value.shape[0] for p in parts]

    def bwd(g):
        offset = 0
        for p, size in zip(parts, sizes):
            _acc(p, g[offset : offset + size])
            offset += size

    out.bwd = bwd
    return out


def stack(items: list[Tensor]) -> Tensor:
    """Stack 0-d tensors into a vector."""
    out = Tensor(np.array([float(t.value) for t in items]), tuple(items))

    def bwd(g):
        for i, t in enumerate(items):
            _acc(t, np.asarray(g[i]))

    out.bwd = bwd
    return out


def vstack(rows: list[Tensor]) -> Tensor:
    """Stack 1-d tensors into a (T, d) matrix."""
    out = Tensor(np.stack([r.value for r in rows]), tuple(rows))

    def bwd(g):
        for i, r in enumerate(rows):
            _acc(r, g[i])

    out.bwd = bwd
    return out


def row(M: Tensor, i: int) -> Tensor:
    out = Tensor(M.value[i].copy(), (M,))

    def bwd(g):
        if M.grad is None:
            M.grad = np.zeros_like(M.value)
        M.grad[i] += g

    out.bwd = bwd
    return out


def at(x: Tensor, i: int) -> Tensor:
    """Scalar element of a vector."""
    out = Tensor(np.asarray(x.value[i]), (x,))

    def bwd(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.value)
        x.grad[i] += g

    out.bwd = bwd
    return out


def slice1d(x: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(x.value[start:stop].copy(), (x,))

    def bwd(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.value)
        x.grad[start:stop] += g

    out.bwd = bwd
    return out


def gather(x: Tensor, idxs) -> Tensor:
    idxs = np.asarray(idxs, dtype=np.intp)
    out = Tensor(x.value[idxs].copy(), (x,))

    def bwd(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.value)
        np.add.at(x.grad, idxs, g)

    out.bwd = bwd
    return out


def stack_grid(seqs: list[list[Tensor]]) -> Tensor:
    """Stack a grid of equal-length 1-d tensors into a (B, T, d) tensor."""
    value = np.stack([np.stack([t.value for t in seq]) for seq in seqs])
    parents = tuple(t for seq in seqs for t in seq)
    out = Tensor(value, parents)

    def bwd(g):
        for bi, seq in enumerate(seqs):
            for t, item in enumerate(seq):
                _acc(item, g[bi, t])

    out.bwd = bwd
    return out


def row2(X: Tensor, b: int, t: int) -> Tensor:
    """One (d,) row of a (B, T, d) tensor."""
    out = Tensor(X.value[b, t].copy(), (X,))

    def bwd(g):
        if X.grad is None:
            X.grad = np.zeros_like(X.value)
        X.grad[b, t] += g

    out.bwd = bwd
    return out


def flatten2(X: Tensor) -> Tensor:
    """(B, T, d) -> (B*T, d) view-preserving reshape."""
    b_dim, t_dim, d = X.value.shape
    out = Tensor(X.value.reshape(b_dim * t_dim, d), (X,))

    def bwd(g):
        _acc(X, g.reshape(b_dim, t_dim, d))

    out.bwd = bwd
    return out


def affine_rows(X: Tensor, W: Tensor, bias: Tensor) -> Tensor:
    """Row-wise affine map: X (n, h) @ W.T + bias, with W (m, h), bias (m,)."""
    out = Tensor(X.value @ W.value.T + bias.value, (X, W, bias))

    def bwd(g):
        _acc_owned(X, g @ W.value)
        _acc_owned(W, g.T @ X.value)
        _acc_owned(bias, g.sum(axis=0))

    out.bwd = bwd
    return out


def softmax(x: Tensor) -> Tensor:
    z = x.value - np.max(x.value)
    e = np.exp(z)
    y = e / e.sum()
    out = Tensor(y, (x,))

    def bwd(g):
        _acc_owned(x, y * (g - np.dot(g, y)))

    out.bwd = bwd
    return out


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Softmax cross-entropy against a hard target index; fused backward."""
    z = logits.value - np.max(logits.value)
    log_probs = z - np.log(np.exp(z).sum())
    out = Tensor(np.asarray(-log_probs[target]), (logits,))
    probs = np.exp(log_probs)

    def bwd(g):
        grad = probs * g
        grad[target] -= g
        _acc_owned(logits, grad)

    out.bwd = bwd
    return out
