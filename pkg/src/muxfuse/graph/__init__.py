from muxfuse.graph.types import DatasetManifest, LayerAdjacency, LayerSpec, MultiplexGraph, Split
from muxfuse.graph.graph_io import load_dataset, load_manifest, read_edges, write_dataset, write_edges, write_manifest
from muxfuse.graph.graph_transforms import (
    build_knn_layer,
    corrupt_features,
    corruption_permutation,
    flatten,
    layer_adjacencies,
    normalize_adjacency,
    symmetric_multiplicity,
    with_layer,
)
from muxfuse.graph.graph_splits import make_splits, resolve_split
from muxfuse.graph.graph_synthetic import make_planted_partition

__all__ = [
    "DatasetManifest",
    "LayerAdjacency",
    "LayerSpec",
    "MultiplexGraph",
    "Split",
    "build_knn_layer",
    "corrupt_features",
    "corruption_permutation",
    "flatten",
    "layer_adjacencies",
    "load_dataset",
    "load_manifest",
    "make_planted_partition",
    "make_splits",
    "normalize_adjacency",
    "read_edges",
    "resolve_split",
    "symmetric_multiplicity",
    "with_layer",
    "write_dataset",
    "write_edges",
    "write_manifest",
]
