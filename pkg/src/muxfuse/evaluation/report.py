from __future__ import annotations

import logging
import time
from typing import Annotated

import numpy as np
import pydantic

from muxfuse.constants import KMEANS_SEEDS, SIM_AT_K
from muxfuse.graph import MultiplexGraph, Split
from muxfuse.evaluation.metrics import derive_seeds, kmeans_nmi, logreg_macro_f1, sim_at_k

logger = logging.getLogger(__name__)

UnitFloat = Annotated[float, pydantic.Field(ge=0.0, le=1.0)]


class EvalConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    classifier_seeds: int = pydantic.Field(default=5, ge=1)
    classifier_steps: int = pydantic.Field(default=300, ge=1)
    classifier_lr: float = pydantic.Field(default=0.01, gt=0)
    classifier_weight_decay: float = pydantic.Field(default=1e-4, ge=0)
    kmeans_seeds: int = pydantic.Field(default=KMEANS_SEEDS, ge=1)
    sim_k: int = pydantic.Field(default=SIM_AT_K, ge=1)
    tasks: tuple[str, ...] = ("clf", "clu", "sim")


class EvaluationReport(pydantic.BaseModel):
    """Downstream metrics of one embedding matrix. Absent tasks stay None."""
    model_config = pydantic.ConfigDict(validate_assignment=True)

    macro_f1: UnitFloat | None = None
    macro_f1_std: pydantic.NonNegativeFloat | None = None
    val_macro_f1: UnitFloat | None = None
    nmi: UnitFloat | None = None
    nmi_std: pydantic.NonNegativeFloat | None = None
    sim_at_5: UnitFloat | None = None
    classifier_seeds: list[int] = []
    kmeans_seeds: list[int] = []
    timing_s: dict[str, float] = {}
    metadata: dict[str, str] = {}


def evaluate_embeddings(z: np.ndarray,
                        g: MultiplexGraph,
                        split: Split,
                        cfg: EvalConfig = EvalConfig(),
                        seed: int = 0) -> EvaluationReport:
    """Runs classification, clustering and similarity search on frozen embeddings.

    Classification: softmax regression on the train nodes, Macro-F1 on the
    test (and val) nodes, one fit per classifier seed. Clustering: k-means on
    every node, NMI on the test nodes. Similarity: Sim@k over all labeled nodes.
    """
    z = np.asarray(z, dtype=np.float64)
    labels = g.labels
    report = EvaluationReport(metadata={"nmi_scope": "test", "sim_scope": "all"})
    if labels is None:
        logger.warning(f"Graph '{g.name}' has no labels; skipping evaluation")
        return report

    if "clf" in cfg.tasks:
        start = time.perf_counter()
        seeds = derive_seeds(seed, cfg.classifier_seeds)
        mean, std, _ = logreg_macro_f1(z, labels, split, seeds, cfg.classifier_lr,
                                       cfg.classifier_steps, cfg.classifier_weight_decay)
        val_split = Split(train=split.train, val=split.val, test=split.val)
        val_mean, _, _ = logreg_macro_f1(z, labels, val_split, seeds[:1], cfg.classifier_lr,
                                         cfg.classifier_steps, cfg.classifier_weight_decay)
        report.macro_f1, report.macro_f1_std, report.val_macro_f1 = mean, std, val_mean
        report.classifier_seeds = seeds
        report.timing_s["clf"] = time.perf_counter() - start

    labeled = np.flatnonzero(labels >= 0)
    if "clu" in cfg.tasks:
        start = time.perf_counter()
        seeds = derive_seeds(seed + 1, cfg.kmeans_seeds)
        mean, std, _ = kmeans_nmi(z, labels, g.num_classes, seeds, eval_index=split.test)
        report.nmi, report.nmi_std = mean, std
        report.kmeans_seeds = seeds
        report.timing_s["clu"] = time.perf_counter() - start

    if "sim" in cfg.tasks:
        start = time.perf_counter()
        report.sim_at_5 = sim_at_k(z, labels, cfg.sim_k, nodes=labeled)
        report.timing_s["sim"] = time.perf_counter() - start

    logger.info(f"Evaluation: Macro-F1={report.macro_f1}, NMI={report.nmi}, Sim@{cfg.sim_k}={report.sim_at_5}")
    return report
