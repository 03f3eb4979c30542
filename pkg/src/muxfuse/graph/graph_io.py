from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pydantic

from muxfuse.constants import FEATURES_FILE_NAME, LABELS_FILE_NAME, MANIFEST_FILE_NAME, SPLITS_FILE_NAME
from muxfuse.errors import DatasetError
from muxfuse.graph.types import DatasetManifest, LayerSpec, MultiplexGraph, Split
from muxfuse.ndauto import Tensor
from muxfuse.tools import file_utils

logger = logging.getLogger(__name__)


def load_manifest(path: Path) -> DatasetManifest:
    manifest_file = path / MANIFEST_FILE_NAME
    if not manifest_file.exists():
        logger.error(f"Dataset manifest not found: {manifest_file}")
        raise DatasetError(f"Missing file: {manifest_file}")
    try:
        return DatasetManifest.model_validate_json(manifest_file.read_text(encoding='utf-8'))
    except pydantic.ValidationError as e:
        logger.error(f"Invalid manifest {manifest_file}: {e}")
        raise DatasetError(f"Invalid manifest {manifest_file}: {e}") from e


def load_dataset(path: Path) -> MultiplexGraph:
    """Loads a multiplex graph from a dataset directory.

    The directory holds `manifest.json`, `features.tsv` (unless the features
    are one-hot), one `.edges` file per layer, an optional labels file and an
    optional `splits.json` with explicit index lists.

    Args:
        path: The dataset directory.

    Returns:
        The loaded graph. Layers flagged `undirected` get their reverse edges
        inserted.
    """
    path = Path(path)
    manifest = load_manifest(path)
    num_nodes = manifest.num_nodes

    if manifest.feature_kind == "onehot":
        features = np.eye(num_nodes)
    else:
        features = _read_features(path / FEATURES_FILE_NAME, num_nodes)

    layers: dict[str, np.ndarray] = {}
    for spec in manifest.layers:
        if spec.name in layers:
            raise DatasetError(f"Duplicate layer name '{spec.name}' in {path / MANIFEST_FILE_NAME}")
        edges = read_edges(path / spec.file, num_nodes)
        if spec.undirected:
            edges = np.concatenate([edges, edges[:, ::-1]], axis=0)
        layers[spec.name] = edges
        logger.debug(f"Layer {spec.name}: {edges.shape[0]} directed edges")

    labels = None
    num_classes = manifest.num_classes or 0
    if manifest.labels_file:
        labels = _read_labels(path / manifest.labels_file, num_nodes)
        if num_classes == 0:
            num_classes = int(labels.max()) + 1 if (labels >= 0).any() else 0
        if labels.max() >= num_classes:
            raise DatasetError(f"Label {labels.max()} exceeds num_classes={num_classes}")

    splits = None
    if (path / SPLITS_FILE_NAME).exists():
        splits = _read_splits(path / SPLITS_FILE_NAME, num_nodes)

    graph = MultiplexGraph(
        name=manifest.name,
        num_nodes=num_nodes,
        features=Tensor(features, name="X"),
        layers=layers,
        labels=labels,
        num_classes=num_classes,
        splits=splits,
        feature_kind=manifest.feature_kind)
    logger.info(f"Loaded dataset '{graph.name}': {num_nodes} nodes, d_in={graph.feature_dim}, "
                f"layers={graph.edge_counts()}, classes={num_classes}")
    return graph


def read_edges(file: Path, num_nodes: int) -> np.ndarray:
    """Reads a `u<TAB>v` edge list with 0-based endpoints; blank lines are skipped."""
    if not file.exists():
        logger.error(f"Edge file not found: {file}")
        raise DatasetError(f"Missing file: {file}")

    pairs: list[tuple[int, int]] = []
    with open(file, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split('\t')
            try:
                if len(parts) != 2:
                    raise ValueError
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                logger.error(f"Malformed edge at {file}:{line_no}: {stripped!r}")
                raise DatasetError(f"{file}:{line_no}: malformed edge line {stripped!r}")
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                logger.error(f"Edge endpoint out of range at {file}:{line_no}")
                raise DatasetError(f"{file}:{line_no}: endpoint out of range [0, {num_nodes}) in ({u}, {v})")
            pairs.append((u, v))

    if not pairs:
        logger.error(f"Layer file {file} has zero edges")
        raise DatasetError(f"{file}: layer has zero edges")
    return np.asarray(pairs, dtype=np.int64)


def _read_features(file: Path, num_nodes: int) -> np.ndarray:
    if not file.exists():
        logger.error(f"Feature file not found: {file}")
        raise DatasetError(f"Missing file: {file}")

    rows: list[np.ndarray] = []
    with open(file, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            stripped = line.rstrip('\n')
            if not stripped.strip():
                continue
            try:
                row = np.array(stripped.split('\t'), dtype=np.float64)
            except ValueError:
                logger.error(f"Malformed feature row at {file}:{line_no}")
                raise DatasetError(f"{file}:{line_no}: malformed feature row")
            if rows and row.shape != rows[0].shape:
                raise DatasetError(f"{file}:{line_no}: expected {rows[0].size} values, got {row.size}")
            if not np.isfinite(row).all():
                raise DatasetError(f"{file}:{line_no}: non-finite feature value")
            rows.append(row)

    if len(rows) != num_nodes:
        logger.error(f"{file} has {len(rows)} rows for {num_nodes} nodes")
        raise DatasetError(f"{file}: {len(rows)} feature rows, manifest declares {num_nodes} nodes")
    return np.vstack(rows)


def _read_labels(file: Path, num_nodes: int) -> np.ndarray:
    if not file.exists():
        logger.error(f"Labels file not found: {file}")
        raise DatasetError(f"Missing file: {file}")

    labels = np.full(num_nodes, -1, dtype=np.int64)
    with open(file, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, 1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split('\t')
            try:
                if len(parts) != 2:
                    raise ValueError
                node, label = int(parts[0]), int(parts[1])
            except ValueError:
                logger.error(f"Malformed label at {file}:{line_no}: {stripped!r}")
                raise DatasetError(f"{file}:{line_no}: malformed label line {stripped!r}")
            if not 0 <= node < num_nodes or label < 0:
                raise DatasetError(f"{file}:{line_no}: node or class out of range in {stripped!r}")
            labels[node] = label
    return labels


def _read_splits(file: Path, num_nodes: int) -> Split:
    try:
        data = json.loads(file.read_text(encoding='utf-8'))
        parts = {key: np.asarray(sorted(data[key]), dtype=np.int64) for key in ("train", "val", "test")}
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        logger.error(f"Invalid splits file {file}: {e}")
        raise DatasetError(f"Invalid splits file {file}: {e}") from e
    for key, idx in parts.items():
        if idx.size and (idx.min() < 0 or idx.max() >= num_nodes):
            logger.error(f"Split '{key}' in {file} holds node ids outside [0, {num_nodes})")
            raise DatasetError(f"{file}: '{key}' holds node ids outside [0, {num_nodes})")
        if np.unique(idx).size != idx.size:
            logger.error(f"Split '{key}' in {file} repeats node ids")
            raise DatasetError(f"{file}: '{key}' repeats node ids")
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        shared = np.intersect1d(parts[a], parts[b])
        if shared.size:
            logger.error(f"Splits '{a}' and '{b}' in {file} share {shared.size} nodes")
            raise DatasetError(f"{file}: '{a}' and '{b}' share node {shared[0]}")
    return Split(train=parts["train"], val=parts["val"], test=parts["test"])


def format_edges(edges: np.ndarray) -> str:
    return "".join(f"{u}\t{v}\n" for u, v in edges.tolist())


def write_edges(edges: np.ndarray, file: Path) -> Path:
    return file_utils.write_text_atomic(file, format_edges(edges))


def write_manifest(manifest: DatasetManifest, path: Path) -> Path:
    return file_utils.write_json_atomic(path / MANIFEST_FILE_NAME, manifest.model_dump())


def write_dataset(g: MultiplexGraph, path: Path) -> Path:
    """Writes a graph in the dataset directory format; layers are written directed.

    Args:
        g: The graph to serialize.
        path: Target directory, created when missing.

    Returns:
        The dataset directory.
    """
    file_names = [f"{name.lower()}.edges" for name in g.layers]
    if len(set(file_names)) != len(file_names):
        logger.error(f"Layer names of '{g.name}' collide once lower-cased: {g.layer_names}")
        raise DatasetError(f"Layer names {g.layer_names} must stay distinct when lower-cased")

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    layer_specs: list[LayerSpec] = []
    for (name, edges), file_name in zip(g.layers.items(), file_names):
        write_edges(edges, path / file_name)
        layer_specs.append(LayerSpec(name=name, file=file_name, undirected=False))

    if g.feature_kind != "onehot":
        feature_text = "".join("\t".join(repr(float(x)) for x in row) + "\n" for row in g.features.values)
        file_utils.write_text_atomic(path / FEATURES_FILE_NAME, feature_text)

    labels_file = None
    if g.labels is not None:
        labels_file = LABELS_FILE_NAME
        label_text = "".join(f"{node}\t{label}\n" for node, label in enumerate(g.labels.tolist()) if label >= 0)
        file_utils.write_text_atomic(path / labels_file, label_text)

    if g.splits is not None:
        file_utils.write_json_atomic(path / SPLITS_FILE_NAME, g.splits.to_dict())

    manifest = DatasetManifest(
        name=g.name,
        num_nodes=g.num_nodes,
        feature_kind="onehot" if g.feature_kind == "onehot" else "dense",
        layers=layer_specs,
        labels_file=labels_file,
        num_classes=g.num_classes or None)
    write_manifest(manifest, path)
    logger.info(f"Wrote dataset '{g.name}' to {path}")
    return path
