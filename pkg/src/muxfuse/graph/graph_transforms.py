"""Structural transforms over multiplex graphs.

Edge lists stay directed (E, 2) arrays throughout. Weights only appear once a
layer is turned into a normalized propagation matrix.
"""
from __future__ import annotations

import dataclasses
import logging

import numpy as np
import scipy.sparse as sp

from muxfuse.errors import DatasetError, NumericError
from muxfuse.graph.types import LayerAdjacency, MultiplexGraph
from muxfuse.ndauto import SparseMatrix, Tensor

logger = logging.getLogger(__name__)

FLATTENED_LAYER_NAME = "flattened"

# Query rows per cosine-similarity block in build_knn_layer.
_KNN_BLOCK = 1024
# Similarities are rounded before ranking so that float noise cannot reorder exact ties.
_KNN_DECIMALS = 12


def flatten(g: MultiplexGraph) -> MultiplexGraph:
    """Merges all layers into one layer holding the multiset union of their edges."""
    edges = np.concatenate([g.layers[name] for name in g.layer_names], axis=0)
    logger.debug(f"Flattened {g.num_layers} layers into {edges.shape[0]} multi-edges")
    return dataclasses.replace(g, layers={FLATTENED_LAYER_NAME: edges})


def with_layer(g: MultiplexGraph, name: str, edges: np.ndarray) -> MultiplexGraph:
    """Returns a copy of g with one more layer, appended last."""
    if name in g.layers:
        logger.error(f"Graph '{g.name}' already has a layer named '{name}'")
        raise DatasetError(f"Layer '{name}' already exists in '{g.name}'")
    return dataclasses.replace(g, layers={**g.layers, name: edges})


def build_knn_layer(g: MultiplexGraph, k: int) -> np.ndarray:
    """Builds a cosine k-nearest-neighbour layer from the node features.

    Every node gets directed edges to its k most similar other nodes, ties
    going to the lowest node index. The reverse of every edge is then
    appended without deduplication, so the layer has exactly 2 * N * k edges.

    Args:
        g: Graph whose features are ranked.
        k: Neighbours per node.

    Returns:
        (2 * N * k, 2) edge array, forward edges first.
    """
    n = g.num_nodes
    if k < 1:
        logger.error(f"Invalid KNN size k={k}")
        raise ValueError("k must be ≥ 1")
    if k >= n:
        logger.error(f"KNN size k={k} needs more than {n} nodes")
        raise ValueError(f"k must be smaller than the number of nodes ({n}), got {k}")

    x = g.features.values
    norms = np.linalg.norm(x, axis=1)
    zero_rows = np.flatnonzero(norms == 0)
    if zero_rows.size:
        logger.error(f"Zero-norm feature rows, first at node {zero_rows[0]}")
        raise DatasetError(f"Node {zero_rows[0]} has an all-zero feature row; cosine similarity is undefined")
    unit = x / norms[:, None]

    targets = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _KNN_BLOCK):
        stop = min(start + _KNN_BLOCK, n)
        sim = np.round(unit[start:stop] @ unit.T, _KNN_DECIMALS)
        sim[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        targets[start:stop] = np.argsort(-sim, axis=1, kind="stable")[:, :k]

    sources = np.repeat(np.arange(n, dtype=np.int64), k)
    forward = np.stack([sources, targets.reshape(-1)], axis=1)
    edges = np.concatenate([forward, forward[:, ::-1]], axis=0)
    logger.info(f"Built KNN layer for '{g.name}' with k={k}: {edges.shape[0]} directed edges")
    return edges


def corruption_permutation(num_nodes: int, seed) -> np.ndarray:
    """Seeded uniform permutation of node ids; never the identity when num_nodes > 1.

    Args:
        num_nodes: Permutation length.
        seed: Anything numpy.random.default_rng accepts, including a Generator.
    """
    rng = np.random.default_rng(seed)
    perm = rng.permutation(num_nodes)
    while num_nodes > 1 and np.array_equal(perm, np.arange(num_nodes)):
        perm = rng.permutation(num_nodes)
    return perm


def corrupt_features(g: MultiplexGraph, seed) -> MultiplexGraph:
    perm = corruption_permutation(g.num_nodes, seed)
    shuffled = Tensor(g.features.values[perm], name="X_corrupted")
    return dataclasses.replace(g, features=shuffled)


def symmetric_multiplicity(edges: np.ndarray,
                           num_nodes: int,
                           weights: np.ndarray | None = None) -> sp.csr_matrix:
    """Accumulates parallel edges (or weights) into M and returns (M + M^T) / 2.

    A layer stored with both directions keeps its multiplicities. A layer
    stored one-directionally weighs each edge 1/2 in both directions. The map
    is linear, so symmetrizing layers one by one and summing gives the same
    matrix as symmetrizing their flattened union.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        logger.error(f"Edge endpoint outside [0, {num_nodes})")
        raise DatasetError(f"Edge endpoint outside [0, {num_nodes})")
    if weights is None:
        weights = np.ones(edges.shape[0])
    else:
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != edges.shape[0]:
            raise DatasetError(f"{weights.shape[0]} weights for {edges.shape[0]} edges")
        if not np.isfinite(weights).all():
            raise NumericError("Edge weights must be finite")
        if (weights < 0).any():
            first = int(np.flatnonzero(weights < 0)[0])
            logger.error(f"Negative edge weight {weights[first]} on edge {tuple(edges[first])}")
            raise NumericError(f"Negative edge weight {weights[first]} on edge {tuple(edges[first])}")

    m = sp.coo_matrix((weights, (edges[:, 0], edges[:, 1])), shape=(num_nodes, num_nodes)).tocsr()
    m.sum_duplicates()
    return ((m + m.T) * 0.5).tocsr()


def normalize_adjacency(edges: np.ndarray,
                        num_nodes: int,
                        weights: np.ndarray | None = None) -> SparseMatrix:
    """Symmetric GCN normalization D^-1/2 (A + I) D^-1/2 with D = rowsum(A + I)."""
    a = symmetric_multiplicity(edges, num_nodes, weights) + sp.identity(num_nodes, format="csr")
    degree = np.asarray(a.sum(axis=1)).reshape(-1)
    d_inv_sqrt = sp.diags(1.0 / np.sqrt(degree))
    return SparseMatrix(d_inv_sqrt @ a @ d_inv_sqrt)


def layer_adjacencies(g: MultiplexGraph) -> list[LayerAdjacency]:
    adjacencies = [
        LayerAdjacency(name=name, matrix=normalize_adjacency(edges, g.num_nodes), raw_edge_count=int(edges.shape[0]))
        for name, edges in g.layers.items()
    ]
    logger.debug(f"Normalized {len(adjacencies)} layer adjacencies for '{g.name}'")
    return adjacencies
