"""Adam optimizer with bias correction, operating in place on parameters."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["Adam", "NonFiniteGradient"]


class NonFiniteGradient(RuntimeError):
    """Raised when a step sees a NaN/inf gradient; the step is rejected."""


class Adam:
    """Standard bias-corrected Adam.

    State holds one first/second moment accumulator per parameter plus the
    step counter. A non-finite gradient rejects the whole step before any
    state or parameter is touched.
    """

    def __init__(
        self,
        params: list[Tensor],
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        grads = []
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradient(f"non-finite gradient in parameter {i} (shape {p.data.shape})")
            grads.append(g)
        self.step_count += 1
        c1 = 1.0 - self.beta1**self.step_count
        c2 = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(self.params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
