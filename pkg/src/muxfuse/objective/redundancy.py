from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from muxfuse.constants import STANDARDIZE_EPS
from muxfuse.errors import DimensionError, NumericError
from muxfuse.ndauto import Tensor
from muxfuse.ndauto import ops

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BtConfig:
    """Barlow Twins settings. `lam=None` weighs off-diagonal terms by 1/d."""
    lam: float | None = None
    eps: float = STANDARDIZE_EPS

    def __post_init__(self):
        if self.lam is not None and (not np.isfinite(self.lam) or self.lam < 0):
            raise ValueError(f"BT lambda must be finite and non-negative, got {self.lam}")

    def off_diagonal_weight(self, dim: int) -> float:
        return 1.0 / dim if self.lam is None else self.lam


def _check_variance(z: Tensor, which: str) -> None:
    constant = np.flatnonzero(np.ptp(z.values, axis=0) == 0)
    if constant.size:
        logger.error(f"Embedding {which} has constant column {constant[0]}")
        raise NumericError(f"barlow_twins_loss: column {constant[0]} of {which} has zero variance")


def cross_correlation(z_a: Tensor, z_b: Tensor, eps: float = STANDARDIZE_EPS) -> Tensor:
    """d x d correlation of the column-standardized inputs."""
    za = ops.colwise_standardize(z_a, eps)
    zb = ops.colwise_standardize(z_b, eps)
    return ops.scale(ops.matmul(ops.transpose(za), zb), 1.0 / z_a.rows)


def barlow_twins_loss(z_a: Tensor, z_b: Tensor, cfg: BtConfig = BtConfig()) -> Tensor:
    """Sum of (1 - C_ii)^2 plus lambda times the sum of squared off-diagonal C_ij."""
    if z_a.shape != z_b.shape:
        logger.error(f"BT inputs differ in shape: {z_a.shape} vs {z_b.shape}")
        raise DimensionError(f"barlow_twins_loss: {z_a.shape} vs {z_b.shape}")
    if z_a.rows < 2:
        raise DimensionError("barlow_twins_loss needs at least 2 rows")
    _check_variance(z_a, "Z_a")
    _check_variance(z_b, "Z_b")

    d = z_a.cols
    c = cross_correlation(z_a, z_b, cfg.eps)
    eye = Tensor(np.eye(d))
    on_diag = ops.sub(eye, ops.hadamard(c, eye))
    off_diag = ops.hadamard(c, Tensor(1.0 - np.eye(d)))
    loss = ops.sum_all(ops.hadamard(on_diag, on_diag))
    lam = cfg.off_diagonal_weight(d)
    if lam:
        loss = ops.add(loss, ops.scale(ops.sum_all(ops.hadamard(off_diag, off_diag)), lam))
    return loss


def mse_loss(z_a: Tensor, z_b: Tensor) -> Tensor:
    if z_a.shape != z_b.shape:
        logger.error(f"MSE inputs differ in shape: {z_a.shape} vs {z_b.shape}")
        raise DimensionError(f"mse_loss: {z_a.shape} vs {z_b.shape}")
    diff = ops.sub(z_a, z_b)
    return ops.mean_all(ops.hadamard(diff, diff))
