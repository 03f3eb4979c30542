"""Graph-level fusion with one learnable weight per layer.

An edge present in several layers gets the sum of those layers' weights,
an edge repeated within a layer counts that layer's weight once per copy.
The weighted adjacency is normalized like any other GCN adjacency, with the
normalization recorded on the tape so the weights receive gradients.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from muxfuse.errors import DimensionError, NumericError
from muxfuse.graph import MultiplexGraph, symmetric_multiplicity
from muxfuse.ndauto import SparseMatrix, Tensor
from muxfuse.ndauto import ops

logger = logging.getLogger(__name__)


class BetaWeights:
    """K layer weights.

    With `positive=True` (the default) the trainable tensor is a raw value
    mapped through softplus, so effective weights stay positive. With
    `positive=False` the raw values are used as they are.
    """

    def __init__(self, layer_names: Sequence[str], init: float = 1.0, positive: bool = True):
        self.layer_names = list(layer_names)
        self.positive = positive
        raw = _inverse_softplus(np.full(len(self.layer_names), init)) if positive \
            else np.full(len(self.layer_names), init, dtype=np.float64)
        self.raw = Tensor(raw.reshape(-1, 1), requires_grad=True, name="beta")

    @classmethod
    def from_effective(cls, layer_names: Sequence[str], values: Sequence[float], positive: bool = True) -> BetaWeights:
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(layer_names),):
            raise DimensionError(f"{values.size} beta values for {len(layer_names)} layers")
        beta = cls(layer_names, positive=positive)
        beta.raw.values = (_inverse_softplus(values) if positive else values.copy()).reshape(-1, 1)
        return beta

    def __len__(self) -> int:
        return len(self.layer_names)

    def effective(self) -> Tensor:
        return ops.softplus(self.raw) if self.positive else self.raw

    def values(self) -> np.ndarray:
        raw = self.raw.values[:, 0]
        return np.logaddexp(0.0, raw) if self.positive else raw.copy()

    def as_dict(self) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.layer_names, self.values())}

    def parameters(self) -> list[Tensor]:
        return [self.raw]


def _inverse_softplus(x: np.ndarray) -> np.ndarray:
    if (x <= 0).any():
        raise NumericError("softplus-parameterized beta needs positive initial values")
    return np.log(np.expm1(x))


@dataclass(frozen=True)
class MhgcnStructure:
    """Beta-independent part of the fused propagation matrix.

    `multiplicity` holds, for every stored entry of the union pattern, the
    symmetrized edge count of each layer (nnz x K). `self_loops` marks the
    diagonal entries, `row_indicator` sums entry values into node degrees.
    """
    pattern: SparseMatrix
    multiplicity: Tensor
    self_loops: Tensor
    rows: np.ndarray
    cols: np.ndarray
    row_indicator: SparseMatrix
    layer_names: tuple[str, ...]


def mhgcn_structure(g: MultiplexGraph) -> MhgcnStructure:
    n = g.num_nodes
    per_layer = [symmetric_multiplicity(edges, n) for edges in g.layers.values()]
    union = sp.identity(n, format="csr")
    for m in per_layer:
        union = union + m
    pattern = SparseMatrix(union)
    rows = pattern.row_indices()
    cols = pattern.col_idx.astype(np.int64)
    codes = rows * n + cols

    multiplicity = np.zeros((pattern.nnz, len(per_layer)))
    for k, m in enumerate(per_layer):
        coo = m.tocoo()
        positions = np.searchsorted(codes, coo.row.astype(np.int64) * n + coo.col)
        multiplicity[positions, k] = coo.data

    self_loops = np.zeros((pattern.nnz, 1))
    self_loops[np.searchsorted(codes, np.arange(n, dtype=np.int64) * (n + 1)), 0] = 1.0
    indicator = SparseMatrix.from_coo(rows, np.arange(pattern.nnz), np.ones(pattern.nnz), (n, pattern.nnz))
    logger.debug(f"MHGCN structure for '{g.name}': {pattern.nnz} entries over {len(per_layer)} layers")
    return MhgcnStructure(pattern=pattern,
                          multiplicity=Tensor(multiplicity, name="layer_multiplicity"),
                          self_loops=Tensor(self_loops, name="self_loops"),
                          rows=rows,
                          cols=cols,
                          row_indicator=indicator,
                          layer_names=tuple(g.layer_names))


def mhgcn_propagation(g: MultiplexGraph,
                      beta: BetaWeights,
                      structure: MhgcnStructure | None = None) -> SparseMatrix:
    """Normalized adjacency of the beta-weighted sum of all layers.

    Args:
        g: The multiplex graph.
        beta: One weight per layer.
        structure: Cached result of mhgcn_structure(g); rebuilt when omitted.

    Returns:
        SparseMatrix whose values are a tensor differentiable in beta.
    """
    if len(beta) != g.num_layers:
        logger.error(f"{len(beta)} beta weights for {g.num_layers} layers")
        raise DimensionError(f"mhgcn_propagation: {len(beta)} beta weights for {g.num_layers} layers")
    if structure is None:
        structure = mhgcn_structure(g)

    weights = ops.add(ops.matmul(structure.multiplicity, beta.effective()), structure.self_loops)
    if (weights.values < 0).any():
        logger.error(f"Negative fused edge weight with beta={beta.as_dict()}")
        raise NumericError("Fused edge weights became negative; keep beta positive (softplus "
                           "parameterization) instead of clamping")
    degree = ops.spmm(structure.row_indicator, weights)
    if (degree.values <= 0).any():
        logger.error(f"Non-positive fused degree with beta={beta.as_dict()}")
        raise NumericError("Fused node degree is not positive; re-parameterize beta to stay positive")
    d_inv_sqrt = ops.power(degree, -0.5)
    values = ops.hadamard(ops.hadamard(ops.slice_rows(d_inv_sqrt, structure.rows), weights),
                          ops.slice_rows(d_inv_sqrt, structure.cols))
    return structure.pattern.with_values(values)
