from __future__ import annotations

import logging

import numpy as np

from muxfuse.graph.types import MultiplexGraph
from muxfuse.ndauto import Tensor

logger = logging.getLogger(__name__)


def make_planted_partition(num_nodes: int,
                           num_classes: int,
                           layers: dict[str, tuple[float, float]],
                           feature_dim: int = 16,
                           signal: float = 1.0,
                           seed: int = 0,
                           name: str = "planted") -> MultiplexGraph:
    """Samples a multiplex stochastic block model.

    Nodes are split into equal contiguous class blocks. Each layer draws every
    unordered pair independently, with its (intra, inter) class probability,
    and stores the edge in both directions. Features are a per-class Gaussian
    mean scaled by `signal` plus unit Gaussian noise.

    Args:
        num_nodes: Node count.
        num_classes: Number of planted classes.
        layers: Layer name to (intra-class, inter-class) edge probability.
        feature_dim: Feature width.
        signal: Scale of the class means relative to the noise.
        seed: Generator seed.
        name: Graph name.
    """
    rng = np.random.default_rng(seed)
    labels = (np.arange(num_nodes) * num_classes // num_nodes).astype(np.int64)
    same_class = labels[:, None] == labels[None, :]
    upper = np.triu(np.ones((num_nodes, num_nodes), dtype=bool), k=1)

    edge_layers: dict[str, np.ndarray] = {}
    for layer_name, (p_in, p_out) in layers.items():
        probs = np.where(same_class, p_in, p_out)
        hits = (rng.random((num_nodes, num_nodes)) < probs) & upper
        u, v = np.nonzero(hits)
        pairs = np.stack([u, v], axis=1).astype(np.int64)
        edge_layers[layer_name] = np.concatenate([pairs, pairs[:, ::-1]], axis=0)

    means = rng.normal(size=(num_classes, feature_dim)) * signal
    features = means[labels] + rng.normal(size=(num_nodes, feature_dim))

    graph = MultiplexGraph(name=name,
                           num_nodes=num_nodes,
                           features=Tensor(features, name="X"),
                           layers=edge_layers,
                           labels=labels,
                           num_classes=num_classes,
                           metadata={"generator": "planted_partition", "seed": str(seed)})
    logger.debug(f"Planted partition '{name}': {graph.edge_counts()}")
    return graph
