from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
import pydantic

from muxfuse.constants import KNN_LAYER_NAME
from muxfuse.errors import UnsupportedMethodError
from muxfuse.evaluation import EvaluationReport, derive_seeds, evaluate_embeddings, macro_f1
from muxfuse.fusion import fuse_reduce
from muxfuse.graph import MultiplexGraph, Split, build_knn_layer, resolve_split, with_layer
from muxfuse.ndauto import no_grad
from muxfuse.pipeline.config import RunConfig
from muxfuse.pipeline.methods import (
    run_prediction_level,
    train_embedding_level,
    train_flattened,
    train_gnn_level,
    train_mhgcn,
    train_per_layer,
)

logger = logging.getLogger(__name__)

FusionLevel = Literal["none", "graph", "gnn", "embedding", "prediction"]


@dataclass(frozen=True)
class MethodInfo:
    method: str
    level: FusionLevel
    trainable_fusion: bool
    self_supervised: bool
    inductive: bool
    description: str


def _method_infos() -> dict[str, MethodInfo]:
    infos = [
        MethodInfo("layers", "none", False, True, True, "per-layer encoders, one report block per layer"),
        MethodInfo("features", "none", False, False, True, "raw node features"),
        MethodInfo("flattened-gcn", "graph", False, False, True, "supervised GCN on the flattened multi-edge graph"),
        MethodInfo("flattened-dgi", "graph", False, True, True, "DGI on the flattened multi-edge graph"),
        MethodInfo("mhgcn", "graph", True, True, True, "learned per-layer edge weights, link prediction"),
    ]
    for base in ("dgi", "gbt"):
        for fuser, name in (("att", "attention"), ("cl", "concat + linear")):
            infos.append(MethodInfo(f"f-{base}-{fuser}", "gnn", True, True, True,
                                    f"{base.upper()} encoders trained jointly with {name} fusion"))
    for kind in ("mean", "min", "max", "sum", "concat"):
        infos.append(MethodInfo(f"emb-{kind}", "embedding", False, True, True, f"{kind} of frozen layer embeddings"))
    for fuser, name, inductive in (("att", "attention", True), ("cl", "concat + linear", True), ("lk", "lookup", False)):
        for loss in ("bt", "mse"):
            infos.append(MethodInfo(f"emb-{fuser}-{loss}", "embedding", True, True, inductive,
                                    f"{name} fuser fitted post hoc with {loss.upper()} loss"))
    for mode in ("soft", "hard"):
        infos.append(MethodInfo(f"vote-{mode}", "prediction", False, False, True,
                                f"{mode} voting over per-layer classifiers (classification only)"))
    return {info.method: info for info in infos}


METHODS: dict[str, MethodInfo] = _method_infos()

OUT_OF_SCOPE: dict[str, str] = {
    "dw": "DeepWalk random-walk baseline is out of scope",
    "deepwalk": "DeepWalk random-walk baseline is out of scope",
    "gat": "GAT encoders are out of scope",
    "flattened-gat": "GAT encoders are out of scope",
    "dmgi": "full DMGI reproduction is out of scope; its lookup fusion is available as emb-lk-*",
    "hdgi": "full HDGI reproduction is out of scope; its semantic attention is available as emb-att-* and f-dgi-att",
    "s2mgrl": "full S2MGRL reproduction is out of scope; its BT pairing is available as f-gbt-* with gbt_mlp_term",
}

_FUSER_IDS = {"att": "att", "cl": "cl", "lk": "lookup"}


def method_table() -> list[dict[str, Any]]:
    """Taxonomy listing of implemented and out-of-scope method ids."""
    rows: list[dict[str, Any]] = [
        {"method": info.method, "level": info.level, "trainable_fusion": info.trainable_fusion,
         "self_supervised": info.self_supervised, "inductive": info.inductive, "in_scope": True,
         "description": info.description}
        for info in METHODS.values()
    ]
    rows += [
        {"method": method, "level": None, "trainable_fusion": None, "self_supervised": None, "inductive": None,
         "in_scope": False, "description": reason}
        for method, reason in OUT_OF_SCOPE.items()
    ]
    return rows


def method_info(method: str) -> MethodInfo:
    if method in METHODS:
        return METHODS[method]
    if method in OUT_OF_SCOPE:
        logger.error(f"Method '{method}' is out of scope")
        raise UnsupportedMethodError(f"Method '{method}': {OUT_OF_SCOPE[method]}")
    logger.error(f"Unknown method '{method}'")
    raise UnsupportedMethodError(f"Unknown method '{method}'. Known methods: {sorted(METHODS)}")


class RunReport(pydantic.BaseModel):
    """Everything a run produced besides the embeddings themselves."""
    config: dict[str, Any]
    config_hash: str
    dataset: str
    method: str
    seed: int
    seeds: dict[str, Any] = {}
    loss_curve: list[float] = []
    layer_curves: dict[str, list[float]] = {}
    alpha: dict[str, float] | None = None
    beta: dict[str, float] | None = None
    metrics: dict[str, EvaluationReport] = {}
    primary: list[str] = []
    wall_time_s: float = 0.0
    status: Literal["ok"] = "ok"

    def csv_rows(self) -> list[dict[str, Any]]:
        """One metrics.csv row per primary metric block."""
        rows = []
        for key in self.primary:
            block = self.metrics[key]
            method = self.method if len(self.primary) == 1 else f"{self.method}:{key}"
            rows.append({
                "dataset": self.dataset,
                "method": method,
                "seed": self.seed,
                "maf1": block.macro_f1,
                "maf1_std": block.macro_f1_std,
                "nmi": block.nmi,
                "nmi_std": block.nmi_std,
                "sim5": block.sim_at_5,
                "wall_s": round(self.wall_time_s, 3),
            })
        return rows


def _vote_report(run, g: MultiplexGraph, split: Split, cfg: RunConfig, mode: str) -> EvaluationReport:
    seeds = derive_seeds(cfg.seed, cfg.classifier_seeds)
    scores = [macro_f1(g.labels[split.test], run_prediction_level(run, g, split, cfg, mode, seed)) for seed in seeds]
    val_pred = run_prediction_level(run, g, split, cfg, mode, seeds[0], nodes=split.val)
    return EvaluationReport(macro_f1=float(np.mean(scores)),
                            macro_f1_std=float(np.std(scores)),
                            val_macro_f1=macro_f1(g.labels[split.val], val_pred),
                            classifier_seeds=seeds,
                            metadata={"tasks": "clf", "vote": mode})


def run_method(g: MultiplexGraph, cfg: RunConfig, split: Split | None = None) -> RunReport:
    """Trains the configured method and evaluates its embeddings.

    Args:
        g: The loaded dataset.
        cfg: Run configuration; `cfg.method` picks the taxonomy cell.
        split: Explicit split; resolved from the dataset or drawn from cfg.seed otherwise.

    Returns:
        The run report.
    """
    info = method_info(cfg.method)
    start = time.perf_counter()
    if cfg.k_knn and KNN_LAYER_NAME not in g.layers:
        g = with_layer(g, KNN_LAYER_NAME, build_knn_layer(g, cfg.k_knn))
    if split is None and g.labels is not None:
        split = resolve_split(g, cfg.split_ratios, cfg.seed)
    logger.info(f"Running '{cfg.method}' ({info.level}-level fusion) on '{g.name}' seed={cfg.seed}")

    eval_cfg = cfg.eval_config()
    method = cfg.method
    metrics: dict[str, EvaluationReport] = {}
    primary: list[str] = ["fused"]
    loss_curve: list[float] = []
    layer_curves: dict[str, list[float]] = {}
    alpha = beta = None

    if method == "features":
        metrics["fused"] = evaluate_embeddings(g.features.values, g, split, eval_cfg, cfg.seed)
    elif method == "flattened-gcn":
        run = train_flattened(g, cfg, "supervised_gcn", split)
        loss_curve = run.loss_curve
        metrics["fused"] = evaluate_embeddings(run.fused, g, split, eval_cfg, cfg.seed)
    elif method == "flattened-dgi":
        run = train_flattened(g, cfg, "dgi", split)
        loss_curve = run.loss_curve
        metrics["fused"] = evaluate_embeddings(run.fused, g, split, eval_cfg, cfg.seed)
    elif method == "mhgcn":
        run = train_mhgcn(g, cfg)
        loss_curve, beta = run.loss_curve, run.beta
        metrics["fused"] = evaluate_embeddings(run.fused, g, split, eval_cfg, cfg.seed)
    elif method.startswith("f-"):
        _, base, fuser = method.split("-")
        run = train_gnn_level(g, cfg, base, fuser)
        loss_curve, alpha = run.loss_curve, run.alpha
        metrics["fused"] = evaluate_embeddings(run.fused, g, split, eval_cfg, cfg.seed)
    else:
        run = train_per_layer(g, cfg, split)
        loss_curve, layer_curves = run.loss_curve, run.layer_curves
        if method == "layers":
            for name, z in zip(run.layer_names, run.layer_embeddings):
                metrics[name] = evaluate_embeddings(z, g, split, eval_cfg, cfg.seed)
            primary = list(run.layer_names)
        elif method.startswith("vote-"):
            metrics["fused"] = _vote_report(run, g, split, cfg, method.removeprefix("vote-"))
        else:
            parts = method.split("-")
            if len(parts) == 2:
                with no_grad():
                    fused = fuse_reduce(parts[1], run.embeddings()).values
            else:
                fusion = train_embedding_level(run, cfg, _FUSER_IDS[parts[1]], parts[2])
                fused, alpha = fusion.fused, fusion.alpha
                layer_curves = {**layer_curves, "fusion": fusion.loss_curve}
            metrics["fused"] = evaluate_embeddings(fused, g, split, eval_cfg, cfg.seed)

    wall = time.perf_counter() - start
    report = RunReport(config=cfg.model_dump(mode="json"),
                       config_hash=cfg.config_hash(),
                       dataset=g.name,
                       method=method,
                       seed=cfg.seed,
                       seeds={"run": cfg.seed, "split": None if split is None else split.seed},
                       loss_curve=loss_curve,
                       layer_curves=layer_curves,
                       alpha=alpha,
                       beta=beta,
                       metrics=metrics,
                       primary=primary,
                       wall_time_s=wall)
    logger.info(f"Finished '{method}' on '{g.name}' in {wall:.1f}s")
    return report
