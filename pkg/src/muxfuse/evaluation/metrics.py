from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics import f1_score, normalized_mutual_info_score

from muxfuse.constants import KMEANS_MAX_ITER, KMEANS_SEEDS, KMEANS_TOL, SIM_AT_K
from muxfuse.errors import DatasetError, NumericError, SplitError
from muxfuse.evaluation.classifier import SoftmaxRegression
from muxfuse.graph import Split

logger = logging.getLogger(__name__)

# Cosine similarities are rounded before ranking, matching the KNN layer builder.
_SIM_DECIMALS = 12
_SIM_BLOCK = 1024
# Relative slack when asserting that k-means inertia never increases.
_INERTIA_SLACK = 1e-12


def macro_f1(y_true, y_pred) -> float:
    """Unweighted mean of per-class F1 over every class seen in either array."""
    return float(f1_score(y_true, y_pred, average="macro", zero_division=0))


def nmi_score(labels_true, labels_pred) -> float:
    score = normalized_mutual_info_score(labels_true, labels_pred, average_method="arithmetic")
    return float(min(1.0, max(0.0, score)))


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent integer seeds spawned from one run seed."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def check_split_classes(labels: np.ndarray, split: Split) -> None:
    missing = np.setdiff1d(np.unique(labels[split.test]), np.unique(labels[split.train]))
    if missing.size:
        logger.error(f"Test classes {missing.tolist()} have no training node")
        raise SplitError(f"Test class {int(missing[0])} is absent from the training split")


def logreg_macro_f1(z: np.ndarray,
                    labels: np.ndarray,
                    split: Split,
                    seeds: Sequence[int],
                    lr: float = 0.01,
                    steps: int = 300,
                    weight_decay: float = 1e-4) -> tuple[float, float, list[float]]:
    """Test Macro-F1 of a softmax regression fitted on the train nodes, once per seed.

    Returns:
        (mean, std, per-seed scores)
    """
    check_split_classes(labels, split)
    scores = []
    for seed in seeds:
        clf = SoftmaxRegression(lr=lr, steps=steps, weight_decay=weight_decay, random_state=seed)
        clf.fit(z[split.train], labels[split.train])
        scores.append(macro_f1(labels[split.test], clf.predict(z[split.test])))
    return float(np.mean(scores)), float(np.std(scores)), scores


def _squared_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans(x: np.ndarray,
           n_clusters: int,
           seed: int,
           max_iter: int = KMEANS_MAX_ITER,
           tol: float = KMEANS_TOL) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd's k-means with k-means++ seeding.

    Stops when the relative inertia decrease falls below tol. An empty
    cluster gets its centroid moved to the point farthest from its own
    centroid. Inertia must not increase between iterations.

    Returns:
        (assignments, centers, inertia per iteration)
    """
    x = np.asarray(x, dtype=np.float64)
    if not 1 <= n_clusters <= x.shape[0]:
        raise ValueError(f"n_clusters must be in [1, {x.shape[0]}], got {n_clusters}")
    centers, _ = kmeans_plusplus(x, n_clusters, random_state=seed)

    history: list[float] = []
    assign = np.zeros(x.shape[0], dtype=np.int64)
    for iteration in range(max_iter):
        dist = _squared_distances(x, centers)
        assign = np.argmin(dist, axis=1)
        point_cost = dist[np.arange(x.shape[0]), assign]
        inertia = float(point_cost.sum())
        if history and inertia > history[-1] * (1.0 + _INERTIA_SLACK) + _INERTIA_SLACK:
            logger.error(f"k-means inertia rose from {history[-1]} to {inertia} at iteration {iteration}")
            raise NumericError(f"k-means inertia increased at iteration {iteration}")
        history.append(inertia)
        if len(history) > 1 and history[-2] - inertia <= tol * history[-2]:
            break

        counts = np.bincount(assign, minlength=n_clusters)
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, x)
        for cluster in range(n_clusters):
            if counts[cluster]:
                centers[cluster] = sums[cluster] / counts[cluster]
            else:
                farthest = int(np.argmax(point_cost))
                logger.warning(f"Empty k-means cluster {cluster}; re-seeding from point {farthest}")
                centers[cluster] = x[farthest]
                point_cost[farthest] = 0.0
    return assign, centers, history


def kmeans_nmi(z: np.ndarray,
               labels: np.ndarray,
               n_clusters: int,
               seeds: Sequence[int] | int = KMEANS_SEEDS,
               eval_index: np.ndarray | None = None) -> tuple[float, float, list[float]]:
    """NMI between k-means clusters and labels, averaged over seeds.

    Args:
        z: Embeddings of every node; k-means is fitted on all of them.
        labels: Class per node.
        n_clusters: Number of clusters, normally the number of classes.
        seeds: Explicit seeds or a count (seeds 0..count-1).
        eval_index: Nodes whose clusters are scored; all nodes when omitted.
    """
    if isinstance(seeds, int):
        seeds = list(range(seeds))
    index = np.arange(z.shape[0]) if eval_index is None else np.asarray(eval_index)
    scores = []
    for seed in seeds:
        assign, _, _ = kmeans(z, n_clusters, seed)
        scores.append(nmi_score(labels[index], assign[index]))
    return float(np.mean(scores)), float(np.std(scores)), scores


def sim_at_k(z: np.ndarray, labels: np.ndarray, k: int = SIM_AT_K, nodes: np.ndarray | None = None) -> float:
    """Mean fraction of each query's k most cosine-similar nodes that share its class.

    Rankings exclude the query itself; ties go to the lowest node index.

    Args:
        z: Embeddings.
        labels: Class per node.
        k: Neighbours per query.
        nodes: Nodes taking part, as queries and as candidates; all when omitted.
    """
    index = np.arange(z.shape[0]) if nodes is None else np.asarray(nodes, dtype=np.int64)
    emb = np.asarray(z, dtype=np.float64)[index]
    lab = np.asarray(labels)[index]
    n = emb.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must be in [1, {n - 1}] for {n} nodes, got {k}")
    norms = np.linalg.norm(emb, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        logger.error(f"Zero-norm embedding at node {index[zero[0]]}")
        raise DatasetError(f"Node {index[zero[0]]} has a zero-norm embedding; cosine similarity is undefined")
    unit = emb / norms[:, None]

    hits = 0
    for start in range(0, n, _SIM_BLOCK):
        stop = min(start + _SIM_BLOCK, n)
        sim = np.round(unit[start:stop] @ unit.T, _SIM_DECIMALS)
        sim[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        top = np.argsort(-sim, axis=1, kind="stable")[:, :k]
        hits += int((lab[top] == lab[start:stop, None]).sum())
    return hits / (n * k)
