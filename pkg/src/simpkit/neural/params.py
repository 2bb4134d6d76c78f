"""Named parameter storage shared by all trainable models."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .autodiff import Tensor


class ParamStore:
    """A flat registry of named parameter tensors.

    Shapes are fixed at registration; data may be replaced only with an
    array of identical shape and dtype. The seed records how the store was
    initialized so checkpoints can reproduce it.
    """

    def __init__(self, seed: int, dtype="float32"):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._params:
            raise ShapeError(f"parameter {name!r} already registered")
        t = Tensor(np.ascontiguousarray(array, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def set_data(self, name: str, array: np.ndarray) -> None:
        t = self._params[name]
        arr = np.asarray(array, dtype=self.dtype)
        if arr.shape != t.data.shape:
            raise ShapeError(f"{name}: cannot change shape {t.data.shape} -> {arr.shape}")
        t.data = np.ascontiguousarray(arr)

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Gradients accumulated by the last backward pass (zeros if none)."""
        return {
            n: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for n, t in self._params.items()
        }

    def all_finite(self) -> bool:
        return all(np.isfinite(t.data).all() for t in self._params.values())

    def num_params(self) -> int:
        return sum(t.data.size for t in self._params.values())


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
