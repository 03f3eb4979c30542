from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from muxfuse.errors import OptimizerError
from muxfuse.ndauto.tensor import Tensor

logger = logging.getLogger(__name__)


class Adam:
    """Adam with bias correction.

    Weight decay, when set, is the coupled L2 form: decay * param is added to
    the gradient before the moment updates.
    """

    def __init__(self,
                 params: Sequence[Tensor],
                 lr: float = 1e-3,
                 beta1: float = 0.9,
                 beta2: float = 0.999,
                 eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params: list[Tensor] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t: int = 0
        self._m: list[np.ndarray] = [np.zeros(p.shape) for p in self.params]
        self._v: list[np.ndarray] = [np.zeros(p.shape) for p in self.params]

    def step(self) -> None:
        """Applies one update to every parameter, then clears their gradients."""
        missing = [i for i, p in enumerate(self.params) if p.grad is None]
        if missing:
            names = [self.params[i].name or f"#{i}" for i in missing]
            logger.error(f"Adam step without gradients for parameters {names}")
            raise OptimizerError(f"Missing gradient for parameters {names}; run backward first")

        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            grad = p.grad
            if self.weight_decay:
                grad = grad + self.weight_decay * p.values
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / bias1
            v_hat = v / bias2
            p.values = p.values - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.grad = None

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
