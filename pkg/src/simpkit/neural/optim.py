"""Adam with bias correction and optional linear learning-rate warmup."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDiverged
from .params import ParamStore

# reference-scale schedule constants, for documentation and configs
REFERENCE_WARMUP_STEPS = 40_000
REFERENCE_TOTAL_STEPS = 100_000


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    warmup_steps: int = 0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def current_lr(self) -> float:
        """Learning rate in effect at the current step count."""
        if self.warmup_steps > 0 and self.step < self.warmup_steps:
            return self.learning_rate * (self.step / self.warmup_steps)
        return self.learning_rate


def adam_init(store: ParamStore, learning_rate: float, warmup_steps: int = 0,
              beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    state = AdamState(learning_rate=learning_rate, beta1=beta1, beta2=beta2,
                      epsilon=epsilon, warmup_steps=warmup_steps)
    for name, t in store.items():
        state.m[name] = np.zeros_like(t.data)
        state.v[name] = np.zeros_like(t.data)
    return state


def adam_step(state: AdamState, store: ParamStore, grads: dict[str, np.ndarray]) -> None:
    """One in-place update of every parameter named in grads."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise TrainingDiverged(f"non-finite gradient for {name!r} at step {state.step + 1}")
    state.step += 1
    lr = state.current_lr()
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        store[name].data -= update.astype(store.dtype)
    if not store.all_finite():
        raise TrainingDiverged(f"non-finite parameter after step {state.step}")
