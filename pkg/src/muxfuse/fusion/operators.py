"""Embedding fusion operators.

Non-trainable reducers are plain functions. Trainable fusers are FusionOp
objects holding their parameters, so the same operator can be applied to
several embedding sets (e.g. clean and corrupted) with tied weights.
"""
from __future__ import annotations

import logging
from typing import Literal, Sequence

import numpy as np

from muxfuse.encoder import glorot
from muxfuse.errors import DimensionError, InductivityError
from muxfuse.ndauto import Tensor
from muxfuse.ndauto import ops

logger = logging.getLogger(__name__)

ReduceKind = Literal["mean", "min", "max", "sum", "concat"]
REDUCE_KINDS: tuple[str, ...] = ("mean", "min", "max", "sum", "concat")
TRAINABLE_KINDS: tuple[str, ...] = ("att", "cl", "lookup")

DEFAULT_ATTENTION_DIM = 128
LOOKUP_INIT_RANGE = 0.05


def _check_stack(zs: Sequence[Tensor], what: str) -> None:
    if len(zs) == 0:
        logger.error(f"{what} called with no embeddings")
        raise DimensionError(f"{what}: K must be at least 1")
    shape = zs[0].shape
    if any(z.shape != shape for z in zs):
        logger.error(f"{what} shape mismatch: {[z.shape for z in zs]}")
        raise DimensionError(f"{what}: embeddings differ in shape {[z.shape for z in zs]}")


def fuse_reduce(kind: ReduceKind, zs: Sequence[Tensor]) -> Tensor:
    """Elementwise reduction over K embedding matrices; concat stacks columns in layer order.

    mean, sum and concat are differentiable. min and max return constants.
    """
    _check_stack(zs, "fuse_reduce")
    if kind == "concat":
        return ops.concat_cols(list(zs))
    if kind in ("sum", "mean"):
        total = zs[0]
        for z in zs[1:]:
            total = ops.add(total, z)
        return ops.scale(total, 1.0 / len(zs)) if kind == "mean" else total
    if kind == "min":
        return Tensor(np.min(np.stack([z.values for z in zs]), axis=0))
    if kind == "max":
        return Tensor(np.max(np.stack([z.values for z in zs]), axis=0))
    logger.error(f"Unknown reduce kind '{kind}'")
    raise ValueError(f"Unknown reduce kind '{kind}'. Known kinds: {list(REDUCE_KINDS)}")


class FusionOp:
    """Trainable fuser of K embedding matrices of width d.

    att:    W_a (d x d_a), bias b (1 x d_a), context q (1 x d_a)
    cl:     W_cl ((K*d) x d)
    lookup: free table (num_nodes x d)
    """

    def __init__(self,
                 kind: Literal["att", "cl", "lookup"],
                 num_layers: int,
                 dim: int,
                 rng: np.random.Generator,
                 num_nodes: int | None = None,
                 attention_dim: int = DEFAULT_ATTENTION_DIM):
        if kind not in TRAINABLE_KINDS:
            logger.error(f"Unknown trainable fusion kind '{kind}'")
            raise ValueError(f"Unknown trainable fusion kind '{kind}'. Known kinds: {list(TRAINABLE_KINDS)}")
        self.kind = kind
        self.num_layers = num_layers
        self.dim = dim
        self.num_nodes = num_nodes
        self.last_alpha: np.ndarray | None = None

        if kind == "att":
            self.w_att = glorot(dim, attention_dim, rng, name="att.W")
            self.b_att = Tensor(np.zeros((1, attention_dim)), requires_grad=True, name="att.b")
            self.q_att = glorot(1, attention_dim, rng, name="att.q")
        elif kind == "cl":
            self.w_cl = glorot(num_layers * dim, dim, rng, name="cl.W")
        else:
            if num_nodes is None:
                raise ValueError("lookup fusion needs the number of nodes")
            self.table = Tensor(rng.uniform(-LOOKUP_INIT_RANGE, LOOKUP_INIT_RANGE, size=(num_nodes, dim)),
                                requires_grad=True, name="lookup")

    def parameters(self) -> list[Tensor]:
        if self.kind == "att":
            return [self.w_att, self.b_att, self.q_att]
        if self.kind == "cl":
            return [self.w_cl]
        return [self.table]

    def __call__(self, zs: Sequence[Tensor]) -> Tensor:
        if self.kind == "att":
            return fuse_attention(self, zs)
        if self.kind == "cl":
            return fuse_concat_linear(self, zs)
        return fuse_lookup(self)

    def alpha_dict(self, layer_names: Sequence[str]) -> dict[str, float] | None:
        if self.last_alpha is None:
            return None
        return {name: float(a) for name, a in zip(layer_names, self.last_alpha)}


def attention_weights(op: FusionOp, zs: Sequence[Tensor]) -> Tensor:
    """Softmax over layers of the node-averaged q . tanh(z W_a + b) scores, as a (1, K) row."""
    scores = [
        ops.mean_all(ops.matmul(ops.tanh(ops.add(ops.matmul(z, op.w_att), op.b_att)), ops.transpose(op.q_att)))
        for z in zs
    ]
    return ops.softmax_rows(ops.concat_cols(scores))


def fuse_attention(op: FusionOp, zs: Sequence[Tensor]) -> Tensor:
    _check_stack(zs, "fuse_attention")
    if op.kind != "att":
        raise ValueError(f"fuse_attention needs an 'att' operator, got '{op.kind}'")
    if zs[0].cols != op.dim:
        raise DimensionError(f"fuse_attention: operator built for d={op.dim}, got {zs[0].cols}")
    alpha = attention_weights(op, zs)
    op.last_alpha = alpha.values[0].copy()
    fused = ops.hadamard(zs[0], ops.slice_cols(alpha, [0]))
    for k, z in enumerate(zs[1:], start=1):
        fused = ops.add(fused, ops.hadamard(z, ops.slice_cols(alpha, [k])))
    return fused


def fuse_concat_linear(op: FusionOp, zs: Sequence[Tensor]) -> Tensor:
    _check_stack(zs, "fuse_concat_linear")
    if op.kind != "cl":
        raise ValueError(f"fuse_concat_linear needs a 'cl' operator, got '{op.kind}'")
    if len(zs) != op.num_layers:
        logger.error(f"CL fuser built for {op.num_layers} layers received {len(zs)}")
        raise DimensionError(f"fuse_concat_linear: built for K={op.num_layers}, got {len(zs)} layers")
    return ops.matmul(ops.concat_cols(list(zs)), op.w_cl)


def fuse_lookup(op: FusionOp, nodes: Sequence[int] | np.ndarray | None = None) -> Tensor:
    """The lookup table itself, or its rows for the given nodes."""
    if op.kind != "lookup":
        raise ValueError(f"fuse_lookup needs a 'lookup' operator, got '{op.kind}'")
    if nodes is None:
        return op.table
    idx = np.asarray(nodes, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= op.table.rows):
        logger.error(f"Lookup fusion queried for node {idx.max()} beyond its {op.table.rows} rows")
        raise InductivityError("lookup fusion is not inductive")
    return ops.slice_rows(op.table, idx)
