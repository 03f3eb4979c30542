import os
from pathlib import Path

import numpy as np
import pytest

from muxfuse.errors import DatasetError, SplitError
from muxfuse.graph import (
    MultiplexGraph,
    build_knn_layer,
    corrupt_features,
    corruption_permutation,
    flatten,
    layer_adjacencies,
    load_dataset,
    make_planted_partition,
    make_splits,
    normalize_adjacency,
    read_edges,
    resolve_split,
    symmetric_multiplicity,
    with_layer,
    write_dataset,
)
from muxfuse.ndauto import Tensor

DATA_DIR = os.environ.get("MUXFUSE_DATA_DIR")


def _graph(features: np.ndarray, layers: dict[str, np.ndarray], labels: np.ndarray | None = None) -> MultiplexGraph:
    return MultiplexGraph(name="g", num_nodes=features.shape[0], features=Tensor(features), layers=layers,
                          labels=labels, num_classes=0 if labels is None else int(labels.max()) + 1)


class TestLoadDataset:

    def test_loads_directory(self, dataset_dir):
        g = load_dataset(dataset_dir)
        assert g.num_nodes == 3
        assert g.feature_dim == 2
        assert g.num_classes == 2
        assert g.layer_names == ["A", "B"]
        # undirected layers get both directions
        assert g.edge_counts() == {"A": 4, "B": 1}
        np.testing.assert_array_equal(g.labels, [0, 1, 1])

    def test_empty_layer_file(self, dataset_dir):
        (dataset_dir / "b.edges").write_text("\n")
        with pytest.raises(DatasetError, match="layer has zero edges"):
            load_dataset(dataset_dir)

    def test_malformed_line_reports_position(self, dataset_dir):
        (dataset_dir / "a.edges").write_text("0\t1\n1 x\n")
        with pytest.raises(DatasetError, match=r"a\.edges:2"):
            load_dataset(dataset_dir)

    def test_endpoint_out_of_range(self, tmp_path):
        file = tmp_path / "l.edges"
        file.write_text("0\t7\n")
        with pytest.raises(DatasetError, match="out of range"):
            read_edges(file, 3)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path)

    def test_write_then_load_keeps_structure(self, dataset_dir, tmp_path):
        g = load_dataset(dataset_dir)
        out = write_dataset(g, tmp_path / "copy")
        h = load_dataset(out)
        assert h.edge_counts() == g.edge_counts()
        np.testing.assert_array_equal(h.features.values, g.features.values)
        np.testing.assert_array_equal(h.labels, g.labels)

    def test_onehot_features(self, dataset_dir):
        manifest = (dataset_dir / "manifest.json").read_text().replace('"dense"', '"onehot"')
        (dataset_dir / "manifest.json").write_text(manifest)
        g = load_dataset(dataset_dir)
        np.testing.assert_array_equal(g.features.values, np.eye(3))

    def test_layer_names_differing_in_case(self, tmp_path):
        g = _graph(np.eye(2), {"ppi": np.array([[0, 1]]), "PPI": np.array([[1, 0]])})
        with pytest.raises(DatasetError, match="lower-cased"):
            write_dataset(g, tmp_path / "out")
        assert not (tmp_path / "out").exists()

    @pytest.mark.parametrize("splits, message", [
        ('{"train": [0, 1], "val": [1], "test": [2]}', "share node 1"),
        ('{"train": [0, 0], "val": [1], "test": [2]}', "repeats"),
        ('{"train": [0], "val": [1], "test": [3]}', "outside"),
    ])
    def test_invalid_splits_file(self, dataset_dir, splits, message):
        (dataset_dir / "splits.json").write_text(splits)
        with pytest.raises(DatasetError, match=message):
            load_dataset(dataset_dir)


class TestFlatten:

    def test_multiset_union(self):
        g = _graph(np.eye(2), {"a": np.array([[0, 1]]), "b": np.array([[0, 1]])})
        edges = flatten(g).layers["flattened"]
        assert edges.tolist() == [[0, 1], [0, 1]]

    def test_single_layer_is_identity(self, path_graph):
        g = MultiplexGraph(name="one", num_nodes=4, features=path_graph.features,
                           layers={"A": path_graph.layers["A"]})
        np.testing.assert_array_equal(flatten(g).layers["flattened"], path_graph.layers["A"])

    def test_edge_count_is_sum(self, toy_graph):
        assert flatten(toy_graph).edge_counts()["flattened"] == sum(toy_graph.edge_counts().values())

    def test_duplicate_layer_name(self, path_graph):
        with pytest.raises(DatasetError, match="already exists"):
            with_layer(path_graph, "A", np.array([[0, 1]]))


class TestKnnLayer:

    def test_edge_count(self, toy_graph):
        edges = build_knn_layer(toy_graph, 3)
        assert edges.shape == (2 * toy_graph.num_nodes * 3, 2)
        assert (edges[:, 0] != edges[:, 1]).all()

    def test_ties_go_to_lowest_index(self):
        g = _graph(np.eye(3), {"a": np.array([[0, 1]])})
        edges = build_knn_layer(g, 1)
        assert edges[:3].tolist() == [[0, 1], [1, 0], [2, 0]]
        assert edges[3:].tolist() == [[1, 0], [0, 1], [0, 2]]

    def test_most_similar_neighbour(self, path_graph):
        edges = build_knn_layer(path_graph, 1)
        assert edges[:4, 1].tolist() == [1, 0, 3, 2]

    def test_invalid_k(self, path_graph):
        with pytest.raises(ValueError, match="k must be ≥ 1"):
            build_knn_layer(path_graph, 0)
        with pytest.raises(ValueError, match="smaller than the number of nodes"):
            build_knn_layer(path_graph, 4)

    def test_zero_feature_row(self):
        g = _graph(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), {"a": np.array([[0, 1]])})
        with pytest.raises(DatasetError, match="Node 1"):
            build_knn_layer(g, 1)

    def test_deterministic(self, toy_graph):
        np.testing.assert_array_equal(build_knn_layer(toy_graph, 2), build_knn_layer(toy_graph, 2))


class TestCorruption:

    def test_never_identity(self):
        for seed in range(50):
            perm = corruption_permutation(2, seed)
            assert perm.tolist() == [1, 0]

    def test_rows_are_permuted(self, toy_graph):
        corrupted = corrupt_features(toy_graph, 3)
        original = sorted(map(tuple, toy_graph.features.values.tolist()))
        assert sorted(map(tuple, corrupted.features.values.tolist())) == original
        assert corrupted.layers is toy_graph.layers

    def test_same_seed_same_permutation(self):
        np.testing.assert_array_equal(corruption_permutation(20, 5), corruption_permutation(20, 5))


class TestNormalizeAdjacency:

    def test_single_edge(self):
        adj = normalize_adjacency(np.array([[0, 1], [1, 0]]), 2)
        np.testing.assert_allclose(adj.to_dense(), [[0.5, 0.5], [0.5, 0.5]])

    def test_one_direction_weighs_half(self):
        adj = normalize_adjacency(np.array([[0, 1]]), 2)
        np.testing.assert_allclose(adj.to_dense(), [[2 / 3, 1 / 3], [1 / 3, 2 / 3]])

    def test_opposite_directions_add_up(self):
        np.testing.assert_allclose(symmetric_multiplicity(np.array([[0, 1], [1, 0]]), 2).toarray(),
                                   symmetric_multiplicity(np.array([[0, 1]]), 2).toarray()
                                   + symmetric_multiplicity(np.array([[1, 0]]), 2).toarray())

    def test_symmetric_with_bounded_spectrum(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            edges = rng.integers(0, 8, size=(rng.integers(1, 20), 2))
            dense = normalize_adjacency(edges, 8).to_dense()
            np.testing.assert_allclose(dense, dense.T, atol=1e-12)
            assert np.abs(np.linalg.eigvalsh(dense)).max() <= 1 + 1e-9

    def test_isolated_node_keeps_self_loop(self):
        adj = normalize_adjacency(np.array([[0, 1], [1, 0]]), 3).to_dense()
        np.testing.assert_array_equal(adj[2], [0.0, 0.0, 1.0])

    def test_duplicate_edge_is_weight_two(self):
        doubled = normalize_adjacency(np.array([[0, 1], [0, 1], [1, 0], [1, 0]]), 3)
        weighted = normalize_adjacency(np.array([[0, 1], [1, 0]]), 3, weights=np.array([2.0, 2.0]))
        np.testing.assert_allclose(doubled.to_dense(), weighted.to_dense())

    def test_one_adjacency_per_layer(self, toy_graph):
        adjacencies = layer_adjacencies(toy_graph)
        assert [a.name for a in adjacencies] == toy_graph.layer_names
        for a in adjacencies:
            dense = a.matrix.to_dense()
            np.testing.assert_allclose(dense, dense.T)


class TestSplits:

    @pytest.fixture
    def balanced(self):
        labels = np.repeat([0, 1], 50)
        return _graph(np.ones((100, 1)), {"a": np.array([[0, 1]])}, labels)

    def test_stratified_counts(self, balanced):
        split = make_splits(balanced, (0.1, 0.1, 0.8), seed=0)
        assert (split.train.size, split.val.size, split.test.size) == (10, 10, 80)
        assert np.bincount(balanced.labels[split.train]).tolist() == [5, 5]
        assert not set(split.train) & set(split.test)

    def test_same_seed_same_split(self, balanced):
        a, b = make_splits(balanced, seed=4), make_splits(balanced, seed=4)
        np.testing.assert_array_equal(a.test, b.test)

    def test_train_only_ratios(self, balanced):
        with pytest.raises(SplitError, match="empty evaluation split"):
            make_splits(balanced, (1.0, 0.0, 0.0))

    def test_bad_ratios(self, balanced):
        with pytest.raises(SplitError):
            make_splits(balanced, (0.5, 0.5, 0.5))

    def test_explicit_split_is_preferred(self, dataset_dir):
        (dataset_dir / "splits.json").write_text('{"train": [0], "val": [1], "test": [2]}')
        split = resolve_split(load_dataset(dataset_dir), seed=9)
        assert split.test.tolist() == [2]


def test_planted_partition_shape():
    g = make_planted_partition(30, 3, {"a": (0.5, 0.01), "b": (0.1, 0.1)}, feature_dim=4, seed=1)
    assert g.num_nodes == 30 and g.num_layers == 2 and g.feature_dim == 4
    assert np.bincount(g.labels).tolist() == [10, 10, 10]
    for edges in g.layers.values():
        assert set(map(tuple, edges.tolist())) == set(map(tuple, edges[:, ::-1].tolist()))


@pytest.mark.slow
@pytest.mark.skipif(DATA_DIR is None, reason="MUXFUSE_DATA_DIR not set")
@pytest.mark.parametrize("name, nodes, expected", [("cora", 2708, 54160), ("citeseer", 3327, 66540)])
def test_knn_layer_on_citation_data(name, nodes, expected):
    path = Path(DATA_DIR) / name
    if not path.exists():
        pytest.skip(f"{path} not prepared")
    g = load_dataset(path)
    assert g.num_nodes == nodes
    assert build_knn_layer(g, 10).shape[0] == expected
