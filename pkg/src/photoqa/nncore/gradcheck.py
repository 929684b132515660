"""Central finite-difference gradient checking against the tape's backward."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tape
from .params import ParamStore


@dataclass
class GradCheckReport:
    max_rel_err: float
    tol: float
    worst_param: str | None
    checked: int
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def _rel_err(analytic: float, numeric: float) -> float:
    # Below ~1e-6 both values sit at central-difference noise level
    # (|f| ~ 1 at h=1e-5 leaves ~1e-10 absolute error), so treat as agreeing.
    scale = max(abs(analytic), abs(numeric))
    if scale < 1e-6:
        return 0.0
    return abs(analytic - numeric) / scale


def grad_check(
    model_closure,
    params: ParamStore,
    h: float = 1e-5,
    tol: float = 1e-4,
    max_coords_per_param: int = 5,
    seed: int = 0,
) -> GradCheckReport:
    """Compare backward gradients with central differences on sampled coords.

    model_closure() must rebuild the forward graph from the current parameter
    values and return the scalar loss tensor.
    """
    params.zero_grads()
    loss = model_closure()
    tape.backward(loss)
    grads = {p.name: p.grad.copy() for p in params}
    params.zero_grads()

    rng = np.random.default_rng(seed)
    max_err = 0.0
    worst = None
    checked = 0
    per_param: dict[str, float] = {}

    for p in params:
        flat_value = p.value.reshape(-1)
        flat_grad = grads[p.name].reshape(-1)
        n = flat_value.shape[0]
        if n <= max_coords_per_param:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max_coords_per_param, replace=False)
        worst_here = 0.0
        for idx in coords:
            original = flat_value[idx]
            flat_value[idx] = original + h
            plus = float(model_closure().value)
            flat_value[idx] = original - h
            minus = float(model_closure().value)
            flat_value[idx] = original
            numeric = (plus - minus) / (2.0 * h)
            err = _rel_err(float(flat_grad[idx]), numeric)
            worst_here = max(worst_here, err)
            checked += 1
            if err > max_err:
                max_err = err
                worst = p.name
        per_param[p.name] = worst_here

    return GradCheckReport(max_err, tol, worst, checked, per_param)
