from muxfuse.encoder.gcn import GcnEncoder, encode_layerwise, gcn_forward, glorot
from muxfuse.encoder.mhgcn import BetaWeights, MhgcnStructure, mhgcn_propagation, mhgcn_structure

__all__ = [
    "BetaWeights",
    "GcnEncoder",
    "MhgcnStructure",
    "encode_layerwise",
    "gcn_forward",
    "glorot",
    "mhgcn_propagation",
    "mhgcn_structure",
]
