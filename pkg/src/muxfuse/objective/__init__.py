from muxfuse.objective.dgi import DgiHead, dgi_loss, readout
from muxfuse.objective.redundancy import BtConfig, barlow_twins_loss, cross_correlation, mse_loss
from muxfuse.objective.supervised import (
    cross_entropy_loss,
    edge_scores,
    link_prediction_loss,
    sample_negative_edges,
)

__all__ = [
    "BtConfig",
    "DgiHead",
    "barlow_twins_loss",
    "cross_correlation",
    "cross_entropy_loss",
    "dgi_loss",
    "edge_scores",
    "link_prediction_loss",
    "mse_loss",
    "readout",
    "sample_negative_edges",
]
