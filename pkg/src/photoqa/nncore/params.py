"""Named parameter arrays with paired gradient and Adagrad accumulator storage."""

from __future__ import annotations

import numpy as np

from .tape import Tensor


class Param:
    __slots__ = ("name", "value", "grad", "accum")

    def __init__(self, name: str, value: np.ndarray) -> None:
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.accum = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape


def xavier_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


class ParamStore:
    """Ordered collection of Params; creation order fixes the init RNG stream."""

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self._params: dict[str, Param] = {}
        self._leaves: dict[str, Tensor] = {}

    def add(self, name: str, shape, init: str = "xavier", fan=None) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate param '{name}'")
        if init == "xavier":
            if fan is None:
                if len(shape) == 2:
                    fan = (shape[1], shape[0])
                else:
                    fan = (shape[0], shape[0])
            s = xavier_limit(*fan)
            value = self.rng.uniform(-s, s, size=shape)
        elif init == "zeros":
            value = np.zeros(shape)
        else:
            raise ValueError(f"unknown init '{init}'")
        param = Param(name, value)
        self._params[name] = param
        return param

    def add_value(self, name: str, value: np.ndarray) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate param '{name}'")
        param = Param(name, value)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def names(self) -> list[str]:
        return list(self._params)

    def leaf(self, name: str) -> Tensor:
        """Shared leaf tensor for a param; its grad aliases Param.grad."""
        t = self._leaves.get(name)
        if t is None:
            param = self._params[name]
            t = Tensor(param.value)
            t.grad = param.grad
            self._leaves[name] = t
        return t

    def zero_grads(self) -> None:
        for param in self._params.values():
            param.grad[...] = 0.0

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            param = self._params[name]
            if param.value.shape != value.shape:
                raise ValueError(
                    f"shape mismatch for '{name}': {param.value.shape} vs {value.shape}"
                )
            param.value[...] = value
