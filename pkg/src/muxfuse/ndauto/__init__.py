from muxfuse.ndauto.tensor import Tape, Tensor, backward, no_grad
from muxfuse.ndauto.sparse import SparseMatrix
from muxfuse.ndauto.ops import forward_op
from muxfuse.ndauto.optim import Adam
from muxfuse.ndauto.gradcheck import GradCheckReport, grad_check

__all__ = [
    "Adam",
    "GradCheckReport",
    "SparseMatrix",
    "Tape",
    "Tensor",
    "backward",
    "forward_op",
    "grad_check",
    "no_grad",
]
