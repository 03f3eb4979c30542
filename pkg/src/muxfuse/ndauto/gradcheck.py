from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from muxfuse.ndauto.tensor import Tape, Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    tolerance: float
    checked: int
    worst: tuple[int, int, int] | None = None  # (param index, row, col)


def grad_check(closure: Callable[[], Tensor],
               params: Sequence[Tensor],
               tolerance: float = 1e-4,
               eps: float = 1e-5,
               floor: float = 1e-6,
               analytic: Sequence[np.ndarray] | None = None) -> GradCheckReport:
    """Compares tape gradients with central finite differences.

    Args:
        closure: Rebuilds the scalar loss from the current parameter values.
        params: Tensors to perturb; all must require gradients.
        tolerance: Largest accepted relative error.
        eps: Finite-difference step.
        floor: Lower bound of the relative-error denominator, so entries with
            a vanishing gradient are judged on absolute error.
        analytic: Gradients to check instead of running the backward pass.

    Returns:
        GradCheckReport with the largest relative error over every entry.
    """
    if analytic is None:
        for p in params:
            p.grad = None
        with Tape() as tape:
            loss = closure()
            tape.backward(loss)
        analytic = [p.grad.copy() if p.grad is not None else np.zeros(p.shape) for p in params]
        for p in params:
            p.grad = None

    max_error = 0.0
    worst: tuple[int, int, int] | None = None
    checked = 0
    with no_grad():
        for k, p in enumerate(params):
            for i, j in np.ndindex(*p.shape):
                original = p.values[i, j]
                p.values[i, j] = original + eps
                plus = closure().item()
                p.values[i, j] = original - eps
                minus = closure().item()
                p.values[i, j] = original

                numeric = (plus - minus) / (2.0 * eps)
                exact = analytic[k][i, j]
                error = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
                checked += 1
                if error > max_error:
                    max_error = error
                    worst = (k, i, j)

    passed = max_error <= tolerance
    if not passed:
        logger.warning(f"Gradient check failed: max relative error {max_error:.3e} at {worst}")
    else:
        logger.debug(f"Gradient check passed on {checked} entries (max rel. error {max_error:.3e})")
    return GradCheckReport(passed=passed, max_rel_error=max_error, tolerance=tolerance,
                           checked=checked, worst=worst)
