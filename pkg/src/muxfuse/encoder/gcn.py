from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from muxfuse.constants import PRELU_INIT_SLOPE
from muxfuse.errors import DimensionError
from muxfuse.graph import LayerAdjacency, MultiplexGraph, layer_adjacencies
from muxfuse.ndauto import SparseMatrix, Tensor
from muxfuse.ndauto import ops

logger = logging.getLogger(__name__)


def glorot(fan_in: int, fan_out: int, rng: np.random.Generator, name: str | None = None) -> Tensor:
    """Uniform Glorot initialization as a trainable tensor."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


class GcnEncoder:
    """Stack of GCN layers H <- PReLU(A_hat H W), one weight and slope row per layer."""

    def __init__(self,
                 in_dim: int,
                 dims: int | Sequence[int],
                 rng: np.random.Generator,
                 name: str = "gcn"):
        dims = [dims] if isinstance(dims, int) else list(dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"Encoder dimensions must be positive, got {dims}")
        self.name = name
        self.weights: list[Tensor] = []
        self.slopes: list[Tensor] = []
        prev = in_dim
        for depth, d in enumerate(dims):
            self.weights.append(glorot(prev, d, rng, name=f"{name}.W{depth}"))
            self.slopes.append(Tensor(np.full((1, d), PRELU_INIT_SLOPE), requires_grad=True, name=f"{name}.a{depth}"))
            prev = d

    @classmethod
    def from_weights(cls,
                     weights: Sequence[np.ndarray],
                     slopes: Sequence[np.ndarray | float] | None = None,
                     name: str = "gcn") -> GcnEncoder:
        """Builds an encoder with fixed initial parameters."""
        enc = cls.__new__(cls)
        enc.name = name
        enc.weights = [Tensor(np.array(w, dtype=np.float64), requires_grad=True, name=f"{name}.W{i}")
                       for i, w in enumerate(weights)]
        for prev, nxt in zip(enc.weights, enc.weights[1:]):
            if prev.cols != nxt.rows:
                raise DimensionError(f"Encoder weights do not chain: {prev.shape} then {nxt.shape}")
        if slopes is None:
            slopes = [PRELU_INIT_SLOPE] * len(enc.weights)
        enc.slopes = [Tensor(np.broadcast_to(np.asarray(s, dtype=np.float64), (1, w.cols)).copy(),
                             requires_grad=True, name=f"{name}.a{i}")
                      for i, (w, s) in enumerate(zip(enc.weights, slopes))]
        return enc

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.weights[0].rows

    @property
    def out_dim(self) -> int:
        return self.weights[-1].cols

    def parameters(self) -> list[Tensor]:
        return [p for pair in zip(self.weights, self.slopes) for p in pair]


def gcn_forward(enc: GcnEncoder, adj: SparseMatrix, h: Tensor) -> Tensor:
    if adj.rows != h.rows:
        logger.error(f"Adjacency {adj.shape} does not match input rows {h.rows}")
        raise DimensionError(f"gcn_forward: adjacency {adj.shape} vs input {h.shape}")
    if h.cols != enc.in_dim:
        logger.error(f"Encoder '{enc.name}' expects {enc.in_dim} input columns, got {h.cols}")
        raise DimensionError(f"gcn_forward: encoder expects {enc.in_dim} columns, got {h.cols}")
    for w, slope in zip(enc.weights, enc.slopes):
        h = ops.prelu(ops.spmm(adj, ops.matmul(h, w)), slope)
    return h


def encode_layerwise(g: MultiplexGraph,
                     encoders: Sequence[GcnEncoder],
                     adjacencies: Sequence[LayerAdjacency] | None = None,
                     features: Tensor | None = None) -> list[Tensor]:
    """Runs one encoder per graph layer over the shared features.

    Args:
        g: The multiplex graph.
        encoders: One encoder per layer, in layer order.
        adjacencies: Precomputed normalized adjacencies; built when omitted.
        features: Replacement node features, e.g. a corrupted copy of g.features.

    Returns:
        Z_1 ... Z_K in layer order.
    """
    if len(encoders) != g.num_layers:
        logger.error(f"{len(encoders)} encoders for {g.num_layers} layers")
        raise DimensionError(f"encode_layerwise: {len(encoders)} encoders for {g.num_layers} layers")
    if adjacencies is None:
        adjacencies = layer_adjacencies(g)
    x = g.features if features is None else features
    return [gcn_forward(enc, adjacency.matrix, x) for enc, adjacency in zip(encoders, adjacencies)]
