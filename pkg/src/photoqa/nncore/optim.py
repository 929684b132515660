"""Optimizer steps: plain SGD and Adagrad, plus global-norm gradient clipping.

Both steps zero the gradients after applying them and reject non-finite
gradients by name before touching any value.
"""

from __future__ import annotations

import math

import numpy as np

from .params import ParamStore


class NonFiniteGradient(RuntimeError):
    pass


def _check_finite(params: ParamStore) -> None:
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteGradient(f"non-finite gradient in param '{p.name}'")


def sgd_step(params: ParamStore, lr: float) -> None:
    _check_finite(params)
    for p in params:
        p.value -= lr * p.grad
        p.grad[...] = 0.0


def adagrad_step(params: ParamStore, lr: float, eps: float = 1e-8) -> None:
    _check_finite(params)
    for p in params:
        p.accum += p.grad * p.grad
        p.value -= lr * p.grad / (np.sqrt(p.accum) + eps)
        p.grad[...] = 0.0


def clip_global_norm(params: ParamStore, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        total += float(np.sum(p.grad * p.grad))
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for p in params:
            p.grad *= scale
    return norm
