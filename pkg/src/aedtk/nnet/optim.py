"""Mini-batch gradient descent with classical momentum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Param


@dataclass
class SgdConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    lambda_l1: float = 1e-6
    batch_size: int = 128

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.lambda_l1 < 0:
            raise ValueError("lambda_l1 must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


class SgdMomentum:
    """v <- momentum*v - lr*grad; w <- w + v."""

    def __init__(self, params: list[Param], learning_rate: float, momentum: float = 0.9):
        self.params = params
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.value) for p in params]

    def step(self):
        for p, v in zip(self.params, self.velocity):
            v *= self.momentum
            v -= self.learning_rate * p.grad
            p.value += v
