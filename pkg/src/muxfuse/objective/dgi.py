from __future__ import annotations

import logging

import numpy as np

from muxfuse.constants import LOG_CLAMP
from muxfuse.encoder import glorot
from muxfuse.errors import DimensionError
from muxfuse.ndauto import Tensor
from muxfuse.ndauto import ops

logger = logging.getLogger(__name__)


class DgiHead:
    """Bilinear discriminator between node embeddings and the graph summary."""

    def __init__(self, dim: int, rng: np.random.Generator | None = None, weight: np.ndarray | None = None):
        if weight is not None:
            weight = np.asarray(weight, dtype=np.float64)
            if weight.shape != (dim, dim):
                raise DimensionError(f"Discriminator must be ({dim}, {dim}), got {weight.shape}")
            self.weight = Tensor(weight.copy(), requires_grad=True, name="W_D")
        else:
            self.weight = glorot(dim, dim, rng or np.random.default_rng(0), name="W_D")

    @property
    def dim(self) -> int:
        return self.weight.rows

    def parameters(self) -> list[Tensor]:
        return [self.weight]


def readout(z: Tensor) -> Tensor:
    """Graph summary: sigmoid of the mean node embedding, as a (1, d) row."""
    return ops.sigmoid(ops.mean_rows(z))


def discriminator_logits(head: DgiHead, z: Tensor, summary: Tensor) -> Tensor:
    return ops.matmul(ops.matmul(z, head.weight), ops.transpose(summary))


def binary_log_likelihood(scores: Tensor, positive: bool) -> Tensor:
    """log(score) or log(1 - score), with the probability clamped away from 0 and 1."""
    probs = scores if positive else 1.0 - scores
    return ops.log(ops.clamp(probs, LOG_CLAMP, 1.0 - LOG_CLAMP))


def dgi_loss(head: DgiHead, z_pos: Tensor, z_neg: Tensor) -> Tensor:
    """Binary cross-entropy of telling real node embeddings from corrupted ones.

    Both embeddings are scored against the summary of z_pos; the loss is the
    mean over all 2N terms.
    """
    if z_pos.shape != z_neg.shape:
        logger.error(f"DGI inputs differ in shape: {z_pos.shape} vs {z_neg.shape}")
        raise DimensionError(f"dgi_loss: {z_pos.shape} vs {z_neg.shape}")
    if z_pos.cols != head.dim:
        raise DimensionError(f"dgi_loss: discriminator is {head.dim}-dimensional, embeddings have {z_pos.cols} columns")
    summary = readout(z_pos)
    pos = binary_log_likelihood(ops.sigmoid(discriminator_logits(head, z_pos, summary)), positive=True)
    neg = binary_log_likelihood(ops.sigmoid(discriminator_logits(head, z_neg, summary)), positive=False)
    return ops.scale(ops.add(ops.mean_all(pos), ops.mean_all(neg)), -0.5)
