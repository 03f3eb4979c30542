import json
from pathlib import Path

import numpy as np
import pytest

from muxfuse.graph import MultiplexGraph, make_planted_partition
from muxfuse.ndauto import Tensor
from muxfuse.pipeline import RunConfig


def small_graph(num_nodes: int = 12, seed: int = 0) -> MultiplexGraph:
    """Two layers over two classes: `signal` follows the classes, `noise` is random."""
    return make_planted_partition(num_nodes, 2,
                                  {"signal": (0.7, 0.05), "noise": (0.3, 0.3)},
                                  feature_dim=6, signal=2.0, seed=seed, name="toy")


@pytest.fixture
def toy_graph() -> MultiplexGraph:
    return small_graph()


@pytest.fixture
def path_graph() -> MultiplexGraph:
    """Four nodes on a path plus a second layer with one chord."""
    features = np.array([[1.0, 0.0], [0.9, 0.1], [0.1, 0.9], [0.0, 1.0]])
    return MultiplexGraph(
        name="path",
        num_nodes=4,
        features=Tensor(features, name="X"),
        layers={"A": np.array([[0, 1], [1, 0], [1, 2], [2, 1], [2, 3], [3, 2]]),
                "B": np.array([[0, 3], [3, 0]])},
        labels=np.array([0, 0, 1, 1]),
        num_classes=2)


@pytest.fixture
def dataset_dir(tmp_path: Path) -> Path:
    """A three-node dataset directory in the on-disk format."""
    root = tmp_path / "tiny"
    root.mkdir()
    (root / "manifest.json").write_text(json.dumps({
        "name": "tiny",
        "num_nodes": 3,
        "feature_kind": "dense",
        "layers": [{"name": "A", "file": "a.edges", "undirected": True},
                   {"name": "B", "file": "b.edges"}],
        "labels_file": "labels.tsv",
    }))
    (root / "features.tsv").write_text("1.0\t0.0\n0.0\t1.0\n1.0\t1.0\n")
    (root / "a.edges").write_text("0\t1\n1\t2\n")
    (root / "b.edges").write_text("2\t0\n")
    (root / "labels.tsv").write_text("0\t0\n1\t1\n2\t1\n")
    return root


def fast_config(dataset: Path, method: str, **overrides) -> RunConfig:
    values = dict(dataset=dataset, method=method, dim=8, epochs=20, patience=20, fusion_epochs=20,
                  classifier_seeds=2, classifier_steps=50, kmeans_seeds=2, attention_dim=8,
                  split_ratios=(0.4, 0.2, 0.4))
    values.update(overrides)
    return RunConfig(**values)
