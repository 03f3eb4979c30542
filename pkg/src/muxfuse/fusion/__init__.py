from muxfuse.fusion.operators import (
    REDUCE_KINDS,
    TRAINABLE_KINDS,
    FusionOp,
    attention_weights,
    fuse_attention,
    fuse_concat_linear,
    fuse_lookup,
    fuse_reduce,
)
from muxfuse.fusion.voting import VoteConfig, vote

__all__ = [
    "FusionOp",
    "REDUCE_KINDS",
    "TRAINABLE_KINDS",
    "VoteConfig",
    "attention_weights",
    "fuse_attention",
    "fuse_concat_linear",
    "fuse_lookup",
    "fuse_reduce",
    "vote",
]
