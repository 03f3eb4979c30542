from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import pydantic

from muxfuse.errors import DatasetError
from muxfuse.ndauto import SparseMatrix, Tensor

logger = logging.getLogger(__name__)


class LayerSpec(pydantic.BaseModel):
    name: str
    file: str
    undirected: bool = False


class DatasetManifest(pydantic.BaseModel):
    name: str
    num_nodes: int = pydantic.Field(gt=0)
    feature_kind: Literal["dense", "onehot"] = "dense"
    layers: list[LayerSpec] = pydantic.Field(min_length=1)
    labels_file: str | None = None
    num_classes: int | None = None


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int | None = None

    def to_dict(self) -> dict[str, list[int]]:
        return {"train": self.train.tolist(), "val": self.val.tolist(), "test": self.test.tolist()}


@dataclass(frozen=True)
class MultiplexGraph:
    """Shared node set and features with K named edge layers.

    Edge layers are (E, 2) int64 arrays of directed pairs; an undirected
    relation is stored with both directions. Unlabeled nodes carry label -1.
    """
    name: str
    num_nodes: int
    features: Tensor
    layers: dict[str, np.ndarray]
    labels: np.ndarray | None = None
    num_classes: int = 0
    splits: Split | None = None
    feature_kind: str = "dense"
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            logger.error(f"Graph '{self.name}' has no layers")
            raise DatasetError(f"Graph '{self.name}' needs at least one layer")
        if self.features.rows != self.num_nodes:
            logger.error(f"Graph '{self.name}': {self.features.rows} feature rows for {self.num_nodes} nodes")
            raise DatasetError(f"Feature rows ({self.features.rows}) != num_nodes ({self.num_nodes})")
        for layer_name, edges in self.layers.items():
            if edges.ndim != 2 or edges.shape[1] != 2:
                raise DatasetError(f"Layer '{layer_name}' must be an (E, 2) array, got {edges.shape}")
            if edges.size and (edges.min() < 0 or edges.max() >= self.num_nodes):
                logger.error(f"Layer '{layer_name}' has an endpoint outside [0, {self.num_nodes})")
                raise DatasetError(f"Layer '{layer_name}' has an endpoint outside [0, {self.num_nodes})")
        if self.labels is not None and self.labels.shape != (self.num_nodes,):
            raise DatasetError(f"Labels must have shape ({self.num_nodes},), got {self.labels.shape}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def layer_names(self) -> list[str]:
        return list(self.layers)

    @property
    def feature_dim(self) -> int:
        return self.features.cols

    def edge_counts(self) -> dict[str, int]:
        return {name: int(edges.shape[0]) for name, edges in self.layers.items()}


@dataclass(frozen=True)
class LayerAdjacency:
    name: str
    matrix: SparseMatrix
    raw_edge_count: int
