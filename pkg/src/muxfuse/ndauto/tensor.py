from __future__ import annotations

import itertools
import logging
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from muxfuse.errors import DimensionError, NumericError, TapeError

logger = logging.getLogger(__name__)

_active_tape: ContextVar["Tape | None"] = ContextVar("muxfuse_active_tape", default=None)
_tensor_ids = itertools.count()

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    """Dense row-major float64 grid of rank 2 with an optional gradient slot.

    Scalars and vectors are promoted to 1x1 and 1xn grids. Every entry must be
    finite; a NaN or Inf raises NumericError at construction.
    """

    __array_priority__ = 1000

    def __init__(self,
                 values: Any,
                 requires_grad: bool = False,
                 name: str | None = None):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            logger.error(f"Tensor of rank {arr.ndim} requested")
            raise DimensionError(f"Tensors are rank 2, got an array of rank {arr.ndim}")
        if not np.isfinite(arr).all():
            logger.error(f"Non-finite values passed to tensor '{name}'")
            raise NumericError(f"Tensor '{name or 'unnamed'}' holds non-finite values")

        self.values: np.ndarray = arr
        self.requires_grad: bool = requires_grad
        self.grad: np.ndarray | None = None
        self.name: str | None = name
        self.id: int = next(_tensor_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def item(self) -> float:
        if self.shape != (1, 1):
            raise DimensionError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> Tensor:
        """Returns a constant copy that does not take part in differentiation."""
        return Tensor(self.values.copy(), name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar over muxfuse.ndauto.ops
    def __add__(self, other: Tensor) -> Tensor:
        from muxfuse.ndauto import ops
        return ops.add(self, _as_tensor(other))

    def __radd__(self, other: Any) -> Tensor:
        from muxfuse.ndauto import ops
        return ops.add(_as_tensor(other), self)

    def __sub__(self, other: Tensor) -> Tensor:
        from muxfuse.ndauto import ops
        return ops.sub(self, _as_tensor(other))

    def __rsub__(self, other: Any) -> Tensor:
        from muxfuse.ndauto import ops
        return ops.sub(_as_tensor(other), self)

    def __mul__(self, other: Any) -> Tensor:
        from muxfuse.ndauto import ops
        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.hadamard(self, _as_tensor(other))

    def __rmul__(self, other: Any) -> Tensor:
        return self.__mul__(other)

    def __truediv__(self, other: float) -> Tensor:
        from muxfuse.ndauto import ops
        return ops.scale(self, 1.0 / float(other))

    def __neg__(self) -> Tensor:
        from muxfuse.ndauto import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from muxfuse.ndauto import ops
        return ops.matmul(self, other)

    @property
    def T(self) -> Tensor:
        from muxfuse.ndauto import ops
        return ops.transpose(self)


def _as_tensor(value: Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass
class TapeOp:
    kind: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of differentiable ops for one training step.

    Used as a context manager; ops executed inside the block whose inputs
    require a gradient are appended in execution order, which keeps the
    record topologically sorted. A tape can be replayed backward once.
    """

    def __init__(self):
        self.ops: list[TapeOp] = []
        self.consumed: bool = False
        self._token = None

    def __enter__(self) -> Tape:
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc_info) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.ops)

    def record(self,
               kind: str,
               inputs: tuple[Tensor, ...],
               output: Tensor,
               backward: BackwardFn) -> None:
        if self.consumed:
            raise TapeError("Cannot record on a tape that was already replayed")
        self.ops.append(TapeOp(kind, inputs, output, backward))

    def backward(self, loss: Tensor) -> None:
        """Replays the tape in reverse and accumulates gradients on leaves.

        Every leaf tensor seen on the tape that requires a gradient receives
        one, zero if the loss does not depend on it.
        """
        if self.consumed:
            logger.error("Backward called twice on the same tape")
            raise TapeError("Tape already consumed; record a new one for another backward pass")
        if loss.shape != (1, 1):
            logger.error(f"Backward called on a non-scalar loss of shape {loss.shape}")
            raise TapeError(f"Loss must be a 1x1 tensor, got shape {loss.shape}")
        produced = {op.output.id for op in self.ops}
        if loss.id not in produced:
            logger.error("Backward called on a tensor that is not recorded on this tape")
            raise TapeError("Loss is not recorded on this tape")

        leaves: dict[int, Tensor] = {}
        for op in self.ops:
            for tensor in op.inputs:
                if tensor.requires_grad and tensor.id not in produced:
                    leaves.setdefault(tensor.id, tensor)

        grads: dict[int, np.ndarray] = {loss.id: np.ones((1, 1))}
        for op in reversed(self.ops):
            out_grad = grads.pop(op.output.id, None)
            if out_grad is None:
                continue
            input_grads = op.backward(out_grad)
            for tensor, grad in zip(op.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if grad.shape != tensor.shape:
                    raise DimensionError(
                        f"Backward of '{op.kind}' produced gradient {grad.shape} for input {tensor.shape}")
                if tensor.id in grads:
                    grads[tensor.id] = grads[tensor.id] + grad
                else:
                    grads[tensor.id] = grad

        for tensor_id, leaf in leaves.items():
            if leaf.grad is None:
                leaf.grad = np.zeros(leaf.shape)
            if tensor_id in grads:
                leaf.grad = leaf.grad + grads[tensor_id]

        self.consumed = True
        logger.debug(f"Backward pass replayed {len(self.ops)} ops onto {len(leaves)} leaves")


def active_tape() -> Tape | None:
    return _active_tape.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspends recording for the enclosed block."""
    token = _active_tape.set(None)
    try:
        yield
    finally:
        _active_tape.reset(token)


def backward(loss: Tensor) -> None:
    """Runs the backward pass of the tape the loss was recorded on."""
    tape = active_tape()
    if tape is None:
        logger.error("backward() called outside of a tape context")
        raise TapeError("No active tape; compute the loss inside `with Tape() as tape:`")
    tape.backward(loss)
