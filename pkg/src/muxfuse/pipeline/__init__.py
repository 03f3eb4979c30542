from muxfuse.pipeline.config import GridSpec, RunConfig, load_grid_spec, load_run_config
from muxfuse.pipeline.training import TrainedRun, fit
from muxfuse.pipeline.methods import (
    FusionFit,
    run_prediction_level,
    train_embedding_level,
    train_flattened,
    train_gnn_level,
    train_mhgcn,
    train_per_layer,
    train_per_layer_dgi,
    train_per_layer_gcn,
)
from muxfuse.pipeline.runner import METHODS, OUT_OF_SCOPE, MethodInfo, RunReport, method_info, method_table, run_method
from muxfuse.pipeline.reports import append_metrics, find_report, load_report, write_report
from muxfuse.pipeline.grid import GridResult, aggregate, format_markdown, run_grid

__all__ = [
    "FusionFit",
    "GridResult",
    "GridSpec",
    "METHODS",
    "MethodInfo",
    "OUT_OF_SCOPE",
    "RunConfig",
    "RunReport",
    "TrainedRun",
    "aggregate",
    "append_metrics",
    "find_report",
    "fit",
    "format_markdown",
    "load_grid_spec",
    "load_report",
    "load_run_config",
    "method_info",
    "method_table",
    "run_grid",
    "run_method",
    "run_prediction_level",
    "train_embedding_level",
    "train_flattened",
    "train_gnn_level",
    "train_mhgcn",
    "train_per_layer",
    "train_per_layer_dgi",
    "train_per_layer_gcn",
    "write_report",
]
