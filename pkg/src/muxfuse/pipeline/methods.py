"""Training pipelines for every cell of the fusion taxonomy.

Each pipeline trains its models, then freezes the outputs into a TrainedRun.
Random streams come from `training.stream`, keyed by graph layer index, so a
single-layer graph reproduces the per-layer pipelines exactly.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Literal

import numpy as np

from muxfuse.encoder import BetaWeights, GcnEncoder, gcn_forward, glorot, mhgcn_propagation, mhgcn_structure
from muxfuse.errors import DatasetError, SplitError
from muxfuse.evaluation import SoftmaxRegression, check_split_classes
from muxfuse.fusion import FusionOp, VoteConfig, vote
from muxfuse.graph import (
    LayerAdjacency,
    MultiplexGraph,
    Split,
    corruption_permutation,
    flatten,
    layer_adjacencies,
    normalize_adjacency,
)
from muxfuse.ndauto import SparseMatrix, Tensor, no_grad
from muxfuse.ndauto import ops
from muxfuse.objective import (
    BtConfig,
    DgiHead,
    barlow_twins_loss,
    cross_entropy_loss,
    dgi_loss,
    link_prediction_loss,
    mse_loss,
    sample_negative_edges,
)
from muxfuse.pipeline.config import RunConfig
from muxfuse.pipeline.training import (
    STREAM_CORRUPTION,
    STREAM_INIT,
    STREAM_NEGATIVES,
    STREAM_POSITIVES,
    TrainedRun,
    fit,
    stream,
)

logger = logging.getLogger(__name__)


@dataclass
class FusionFit:
    """Outcome of post-hoc embedding-level fusion."""
    fused: np.ndarray
    loss_curve: list[float]
    alpha: dict[str, float] | None
    op: FusionOp


def _corrupted(x: Tensor, seed: int, key: int, epoch: int) -> Tensor:
    perm = corruption_permutation(x.rows, stream(seed, STREAM_CORRUPTION, key, epoch))
    return Tensor(x.values[perm], name="X_corrupted")


def _bt_config(cfg: RunConfig) -> BtConfig:
    return BtConfig(lam=cfg.bt_lambda, eps=cfg.bt_eps)


def _require_labels(g: MultiplexGraph, split: Split | None, what: str) -> Split:
    if g.labels is None:
        logger.error(f"{what} needs labels, '{g.name}' has none")
        raise DatasetError(f"{what} needs node labels; '{g.name}' has none")
    if split is None:
        raise SplitError(f"{what} needs a train/val/test split")
    return split


def _fit_dgi(adj: SparseMatrix, x: Tensor, cfg: RunConfig, key: int, label: str) -> tuple[np.ndarray, list[float]]:
    rng = stream(cfg.seed, STREAM_INIT, key)
    enc = GcnEncoder(x.cols, cfg.dim, rng, name=label)
    head = DgiHead(cfg.dim, rng)

    def loss_fn(epoch: int) -> Tensor:
        z = gcn_forward(enc, adj, x)
        z_neg = gcn_forward(enc, adj, _corrupted(x, cfg.seed, key, epoch))
        return dgi_loss(head, z, z_neg)

    result = fit(enc.parameters() + head.parameters(), loss_fn, cfg.epochs, cfg.lr, cfg.patience,
                 label=label, log_every=cfg.log_every)
    with no_grad():
        z = gcn_forward(enc, adj, x).values
    return z, result.loss_curve


def _fit_supervised_gcn(adj: SparseMatrix,
                        x: Tensor,
                        labels: np.ndarray,
                        split: Split,
                        num_classes: int,
                        cfg: RunConfig,
                        key: int,
                        label: str) -> tuple[np.ndarray, list[float]]:
    rng = stream(cfg.seed, STREAM_INIT, key)
    enc = GcnEncoder(x.cols, cfg.dim, rng, name=label)
    classifier = glorot(cfg.dim, num_classes, rng, name=f"{label}.head")

    def loss_fn(epoch: int) -> Tensor:
        logits = ops.matmul(gcn_forward(enc, adj, x), classifier)
        return cross_entropy_loss(logits, labels, split.train)

    result = fit(enc.parameters() + [classifier], loss_fn, cfg.epochs, cfg.lr, cfg.patience,
                 label=label, log_every=cfg.log_every)
    with no_grad():
        z = gcn_forward(enc, adj, x).values
    return z, result.loss_curve


def train_per_layer_dgi(g: MultiplexGraph,
                        cfg: RunConfig,
                        adjacencies: list[LayerAdjacency] | None = None) -> TrainedRun:
    """Independent encoder and discriminator per layer; no fusion."""
    start = time.perf_counter()
    adjacencies = adjacencies or layer_adjacencies(g)
    embeddings, curves = [], {}
    for key, adjacency in enumerate(adjacencies):
        logger.info(f"Training DGI on layer '{adjacency.name}' ({adjacency.raw_edge_count} edges)")
        z, curve = _fit_dgi(adjacency.matrix, g.features, cfg, key, f"dgi[{adjacency.name}]")
        embeddings.append(z)
        curves[adjacency.name] = curve
    return TrainedRun(layer_names=g.layer_names,
                      layer_embeddings=embeddings,
                      loss_curve=_summed_curve(curves),
                      layer_curves=curves,
                      wall_time_s=time.perf_counter() - start,
                      config_hash=cfg.config_hash())


def train_per_layer_gcn(g: MultiplexGraph,
                        cfg: RunConfig,
                        split: Split | None,
                        adjacencies: list[LayerAdjacency] | None = None) -> TrainedRun:
    """Supervised GCN per layer; the encoder output is the layer embedding."""
    split = _require_labels(g, split, "Per-layer supervised GCN")
    start = time.perf_counter()
    adjacencies = adjacencies or layer_adjacencies(g)
    embeddings, curves = [], {}
    for key, adjacency in enumerate(adjacencies):
        logger.info(f"Training supervised GCN on layer '{adjacency.name}'")
        z, curve = _fit_supervised_gcn(adjacency.matrix, g.features, g.labels, split, g.num_classes,
                                       cfg, key, f"gcn[{adjacency.name}]")
        embeddings.append(z)
        curves[adjacency.name] = curve
    return TrainedRun(layer_names=g.layer_names,
                      layer_embeddings=embeddings,
                      loss_curve=_summed_curve(curves),
                      layer_curves=curves,
                      wall_time_s=time.perf_counter() - start,
                      config_hash=cfg.config_hash())


def train_per_layer(g: MultiplexGraph, cfg: RunConfig, split: Split | None = None) -> TrainedRun:
    if cfg.layer_model == "gcn":
        return train_per_layer_gcn(g, cfg, split)
    return train_per_layer_dgi(g, cfg)


def _summed_curve(curves: dict[str, list[float]]) -> list[float]:
    """Sum of the per-layer curves; layers that stopped early contribute their last value."""
    if not curves:
        return []
    length = max(len(c) for c in curves.values())
    return [float(sum(c[min(i, len(c) - 1)] for c in curves.values())) for i in range(length)]


def train_flattened(g: MultiplexGraph,
                    cfg: RunConfig,
                    objective: Literal["dgi", "supervised_gcn"],
                    split: Split | None = None) -> TrainedRun:
    """One encoder over the multi-edge union of all layers."""
    start = time.perf_counter()
    flat = flatten(g)
    name = flat.layer_names[0]
    adj = normalize_adjacency(flat.layers[name], flat.num_nodes)
    if objective == "dgi":
        z, curve = _fit_dgi(adj, g.features, cfg, 0, f"dgi[{name}]")
    elif objective == "supervised_gcn":
        split = _require_labels(g, split, "Flattened supervised GCN")
        z, curve = _fit_supervised_gcn(adj, g.features, g.labels, split, g.num_classes, cfg, 0, f"gcn[{name}]")
    else:
        raise ValueError(f"Unknown flattened objective '{objective}'")
    return TrainedRun(layer_names=[name],
                      layer_embeddings=[z],
                      fused=z,
                      loss_curve=curve,
                      wall_time_s=time.perf_counter() - start,
                      config_hash=cfg.config_hash())


def positive_edges(g: MultiplexGraph) -> np.ndarray:
    """Distinct node pairs (u < v) linked in at least one layer."""
    edges = np.concatenate(list(g.layers.values()), axis=0)
    lo, hi = edges.min(axis=1), edges.max(axis=1)
    keep = lo != hi
    codes = np.unique(lo[keep] * g.num_nodes + hi[keep])
    return np.stack([codes // g.num_nodes, codes % g.num_nodes], axis=1)


def train_mhgcn(g: MultiplexGraph, cfg: RunConfig) -> TrainedRun:
    """Jointly learns one weight per layer and a GCN with link prediction.

    Every epoch rebuilds the fused propagation matrix from the current
    weights, subsamples at most `max_pos_edges` positive pairs and draws as
    many negatives from the non-edges of the flattened graph.
    """
    start = time.perf_counter()
    structure = mhgcn_structure(g)
    beta = BetaWeights(g.layer_names, positive=cfg.beta_positive)
    enc = GcnEncoder(g.feature_dim, cfg.dim, stream(cfg.seed, STREAM_INIT, 0), name="mhgcn")
    positives = positive_edges(g)
    if positives.shape[0] == 0:
        raise DatasetError(f"Graph '{g.name}' has no edges between distinct nodes")
    logger.info(f"Training MHGCN on '{g.name}' with {positives.shape[0]} positive pairs")

    def loss_fn(epoch: int) -> Tensor:
        propagation = mhgcn_propagation(g, beta, structure)
        z = gcn_forward(enc, propagation, g.features)
        pos = positives
        if cfg.max_pos_edges is not None and pos.shape[0] > cfg.max_pos_edges:
            rng = stream(cfg.seed, STREAM_POSITIVES, epoch)
            pos = pos[np.sort(rng.choice(pos.shape[0], cfg.max_pos_edges, replace=False))]
        neg = sample_negative_edges(positives, g.num_nodes, pos.shape[0], stream(cfg.seed, STREAM_NEGATIVES, epoch))
        return link_prediction_loss(z, pos, neg)

    result = fit(enc.parameters() + beta.parameters(), loss_fn, cfg.epochs, cfg.lr, cfg.patience,
                 label="mhgcn", log_every=cfg.log_every)
    with no_grad():
        z = gcn_forward(enc, mhgcn_propagation(g, beta, structure), g.features).values
    logger.info(f"Learned layer weights: {beta.as_dict()}")
    return TrainedRun(layer_names=["mhgcn"],
                      layer_embeddings=[z],
                      fused=z,
                      loss_curve=result.loss_curve,
                      wall_time_s=time.perf_counter() - start,
                      config_hash=cfg.config_hash(),
                      beta=beta.as_dict())


def train_gnn_level(g: MultiplexGraph,
                    cfg: RunConfig,
                    base: Literal["dgi", "gbt"],
                    fuser: Literal["att", "cl"]) -> TrainedRun:
    """Per-layer encoders trained jointly with a fuser.

    dgi: DGI loss on every layer plus DGI on the fused clean and corrupted
    embeddings, the same fuser weights serving both branches.
    gbt: Barlow Twins loss between every layer output and the fused output,
    plus an MLP-vs-layer term when `gbt_mlp_term` is set.
    """
    if fuser not in ("att", "cl"):
        raise ValueError(f"GNN-level fusion supports 'att' and 'cl', got '{fuser}'")
    start = time.perf_counter()
    adjacencies = layer_adjacencies(g)
    k_layers = g.num_layers
    encoders = [GcnEncoder(g.feature_dim, cfg.dim, stream(cfg.seed, STREAM_INIT, k), name=f"enc[{name}]")
                for k, name in enumerate(g.layer_names)]
    fusion_rng = stream(cfg.seed, STREAM_INIT, k_layers)
    op = FusionOp(fuser, k_layers, cfg.dim, fusion_rng, attention_dim=cfg.attention_dim)
    params = [p for enc in encoders for p in enc.parameters()] + op.parameters()
    x = g.features

    def encode(features: Tensor) -> list[Tensor]:
        return [gcn_forward(enc, adj.matrix, features) for enc, adj in zip(encoders, adjacencies)]

    if base == "dgi":
        heads = [DgiHead(cfg.dim, fusion_rng) for _ in range(k_layers + 1)]
        params += [p for head in heads for p in head.parameters()]

        def loss_fn(epoch: int) -> Tensor:
            zs = encode(x)
            zs_neg = encode(_corrupted(x, cfg.seed, k_layers, epoch))
            loss = dgi_loss(heads[-1], op(zs), op(zs_neg))
            for head, z, z_neg in zip(heads, zs, zs_neg):
                loss = ops.add(loss, dgi_loss(head, z, z_neg))
            return loss
    elif base == "gbt":
        bt = _bt_config(cfg)
        mlp_weight = mlp_slope = None
        if cfg.gbt_mlp_term:
            mlp_weight = glorot(g.feature_dim, cfg.dim, fusion_rng, name="mlp.W")
            mlp_slope = Tensor(np.full((1, cfg.dim), 0.25), requires_grad=True, name="mlp.a")
            params += [mlp_weight, mlp_slope]

        def loss_fn(epoch: int) -> Tensor:
            zs = encode(x)
            fused = op(zs)
            loss = barlow_twins_loss(zs[0], fused, bt)
            for z in zs[1:]:
                loss = ops.add(loss, barlow_twins_loss(z, fused, bt))
            if mlp_weight is not None:
                h = ops.prelu(ops.matmul(x, mlp_weight), mlp_slope)
                for z in zs:
                    loss = ops.add(loss, barlow_twins_loss(h, z, bt))
            return loss
    else:
        raise ValueError(f"GNN-level fusion supports 'dgi' and 'gbt' bases, got '{base}'")

    label = f"f-{base}-{fuser}"
    result = fit(params, loss_fn, cfg.epochs, cfg.lr, cfg.patience, label=label, log_every=cfg.log_every)
    with no_grad():
        zs = encode(x)
        fused = op(zs).values
    return TrainedRun(layer_names=g.layer_names,
                      layer_embeddings=[z.values for z in zs],
                      fused=fused,
                      loss_curve=result.loss_curve,
                      wall_time_s=time.perf_counter() - start,
                      config_hash=cfg.config_hash(),
                      alpha=op.alpha_dict(g.layer_names))


def train_embedding_level(frozen: TrainedRun,
                          cfg: RunConfig,
                          fuser: Literal["att", "cl", "lookup"],
                          loss: Literal["bt", "mse"]) -> FusionFit:
    """Fits a fuser on frozen layer embeddings by minimizing sum_k L(Z_k, Z_fused).

    Only the fuser parameters are trained.
    """
    zs = frozen.embeddings()
    num_nodes, dim = zs[0].shape
    op = FusionOp(fuser, len(zs), dim, stream(cfg.seed, STREAM_INIT, len(zs) + 1),
                  num_nodes=num_nodes, attention_dim=cfg.attention_dim)
    bt = _bt_config(cfg)
    if loss not in ("bt", "mse"):
        raise ValueError(f"Unknown embedding-level loss '{loss}'")

    def loss_fn(epoch: int) -> Tensor:
        fused = op(zs)
        terms = [barlow_twins_loss(z, fused, bt) if loss == "bt" else mse_loss(z, fused) for z in zs]
        total = terms[0]
        for term in terms[1:]:
            total = ops.add(total, term)
        return total

    result = fit(op.parameters(), loss_fn, cfg.fusion_epochs, cfg.fusion_lr, cfg.patience,
                 label=f"emb-{fuser}-{loss}", log_every=cfg.log_every)
    with no_grad():
        fused = op(zs).values.copy()
    return FusionFit(fused=fused, loss_curve=result.loss_curve, alpha=op.alpha_dict(frozen.layer_names), op=op)


def run_prediction_level(frozen: TrainedRun,
                         g: MultiplexGraph,
                         split: Split | None,
                         cfg: RunConfig,
                         mode: Literal["soft", "hard"],
                         seed: int | None = None,
                         nodes: np.ndarray | None = None) -> np.ndarray:
    """One softmax regression per layer on frozen embeddings, combined by voting.

    Args:
        frozen: Per-layer embeddings.
        g: Graph providing the labels.
        split: Train nodes fit the classifiers.
        cfg: Classifier hyperparameters.
        mode: Voting mode.
        seed: Classifier seed; cfg.seed when omitted.
        nodes: Nodes to predict; the test nodes when omitted.

    Returns:
        Predicted class per requested node.
    """
    split = _require_labels(g, split, "Prediction-level fusion")
    check_split_classes(g.labels, split)
    nodes = split.test if nodes is None else nodes
    seed = cfg.seed if seed is None else seed
    probs = []
    classes = None
    for z in frozen.layer_embeddings:
        clf = SoftmaxRegression(lr=cfg.classifier_lr, steps=cfg.classifier_steps,
                                weight_decay=cfg.classifier_weight_decay, random_state=seed)
        clf.fit(z[split.train], g.labels[split.train])
        probs.append(clf.predict_proba(z[nodes]))
        classes = clf.classes_
    return classes[vote(VoteConfig(mode=mode), probs)]
