from muxfuse.evaluation.classifier import SoftmaxRegression
from muxfuse.evaluation.metrics import (
    check_split_classes,
    derive_seeds,
    kmeans,
    kmeans_nmi,
    logreg_macro_f1,
    macro_f1,
    nmi_score,
    sim_at_k,
)
from muxfuse.evaluation.report import EvalConfig, EvaluationReport, evaluate_embeddings

__all__ = [
    "EvalConfig",
    "EvaluationReport",
    "SoftmaxRegression",
    "check_split_classes",
    "derive_seeds",
    "evaluate_embeddings",
    "kmeans",
    "kmeans_nmi",
    "logreg_macro_f1",
    "macro_f1",
    "nmi_score",
    "sim_at_k",
]
