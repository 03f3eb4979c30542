from __future__ import annotations

import logging

import numpy as np

from muxfuse.errors import DimensionError
from muxfuse.ndauto import Tensor
from muxfuse.ndauto import ops
from muxfuse.objective.dgi import binary_log_likelihood

logger = logging.getLogger(__name__)

# Rejection rounds before negative sampling gives up on a near-complete graph.
_MAX_SAMPLING_ROUNDS = 100


def _edge_array(edges, num_nodes: int, what: str) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
        logger.error(f"{what} edge endpoint outside [0, {num_nodes})")
        raise DimensionError(f"{what} edge endpoint out of range [0, {num_nodes})")
    return arr


def edge_scores(z: Tensor, edges: np.ndarray) -> Tensor:
    """sigmoid(z_u . z_v) for every (u, v), as an (E, 1) column."""
    dots = ops.sum_cols(ops.hadamard(ops.slice_rows(z, edges[:, 0]), ops.slice_rows(z, edges[:, 1])))
    return ops.sigmoid(dots)


def link_prediction_loss(z: Tensor, pos_edges, neg_edges) -> Tensor:
    """Binary cross-entropy of observed edges (target 1) against sampled non-edges (target 0)."""
    pos = _edge_array(pos_edges, z.rows, "positive")
    neg = _edge_array(neg_edges, z.rows, "negative")
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise DimensionError("link_prediction_loss needs at least one positive and one negative edge")
    pos_ll = ops.sum_all(binary_log_likelihood(edge_scores(z, pos), positive=True))
    neg_ll = ops.sum_all(binary_log_likelihood(edge_scores(z, neg), positive=False))
    return ops.scale(ops.add(pos_ll, neg_ll), -1.0 / (pos.shape[0] + neg.shape[0]))


def sample_negative_edges(edges, num_nodes: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draws node pairs uniformly, rejecting self pairs and observed edges in either direction."""
    observed = _edge_array(edges, num_nodes, "observed")
    forbidden = np.union1d(observed[:, 0] * num_nodes + observed[:, 1],
                           observed[:, 1] * num_nodes + observed[:, 0])
    available = num_nodes * (num_nodes - 1) - np.count_nonzero(forbidden // num_nodes != forbidden % num_nodes)
    if count > 0 and available <= 0:
        logger.error("No non-edges left to sample negatives from")
        raise ValueError("The graph is complete; no negative edges exist")

    picked: list[np.ndarray] = []
    remaining = count
    for _ in range(_MAX_SAMPLING_ROUNDS):
        if remaining <= 0:
            break
        draws = rng.integers(0, num_nodes, size=(2 * remaining + 16, 2))
        codes = draws[:, 0] * num_nodes + draws[:, 1]
        keep = (draws[:, 0] != draws[:, 1]) & ~np.isin(codes, forbidden)
        accepted = draws[keep][:remaining]
        picked.append(accepted)
        remaining -= accepted.shape[0]
    if remaining > 0:
        logger.error(f"Negative sampling stalled with {remaining} pairs missing")
        raise ValueError(f"Could not sample {count} negative edges")
    negatives = np.concatenate(picked, axis=0) if picked else np.empty((0, 2), dtype=np.int64)
    logger.debug(f"Sampled {negatives.shape[0]} negative edges")
    return negatives.astype(np.int64)


def cross_entropy_loss(logits: Tensor, labels, mask) -> Tensor:
    """Mean negative log-softmax probability of the true class over the masked rows."""
    labels = np.asarray(labels, dtype=np.int64)
    idx = np.asarray(mask, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise DimensionError("cross_entropy_loss: empty mask")
    targets = labels[idx]
    if (targets < 0).any() or (targets >= logits.cols).any():
        bad = int(targets[(targets < 0) | (targets >= logits.cols)][0])
        logger.error(f"Label {bad} outside [0, {logits.cols})")
        raise DimensionError(f"cross_entropy_loss: label {bad} outside [0, {logits.cols})")
    log_probs = ops.log_softmax_rows(ops.slice_rows(logits, idx))
    return ops.scale(ops.mean_all(ops.pick(log_probs, targets)), -1.0)
