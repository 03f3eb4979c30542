"""Differentiable ops over rank-2 tensors.

Every op computes its output eagerly, checks it is finite and, when a tape is
active and an input requires a gradient, records a backward closure on the
tape. Reductions run in index-ascending order so that identical inputs give
bit-identical outputs.
"""
from __future__ import annotations

import logging
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import expit

from muxfuse.constants import STANDARDIZE_EPS
from muxfuse.errors import DimensionError, NumericError
from muxfuse.ndauto.sparse import SparseMatrix
from muxfuse.ndauto.tensor import BackwardFn, Tensor, active_tape

logger = logging.getLogger(__name__)

# Rows of the (nnz x c) product buffer built when differentiating sparse values.
_SPMM_VALUE_CHUNK = 1 << 18


def _emit(kind: str,
          values: np.ndarray,
          inputs: tuple[Tensor, ...],
          backward: BackwardFn) -> Tensor:
    if not np.isfinite(values).all():
        logger.error(f"Op '{kind}' produced non-finite values")
        raise NumericError(f"Op '{kind}' produced non-finite output")

    requires_grad = any(t.requires_grad for t in inputs)
    tape = active_tape()
    if requires_grad and tape is not None:
        out = Tensor(values, requires_grad=True)
        tape.record(kind, inputs, out, backward)
        return out
    return Tensor(values)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad


def _check_broadcast(kind: str, a: Tensor, b: Tensor) -> None:
    for axis in (0, 1):
        if a.shape[axis] != b.shape[axis] and 1 not in (a.shape[axis], b.shape[axis]):
            logger.error(f"Op '{kind}' cannot broadcast {a.shape} with {b.shape}")
            raise DimensionError(f"{kind}: shapes {a.shape} and {b.shape} do not broadcast")


def _index_array(index: Sequence[int] | np.ndarray, size: int, kind: str) -> np.ndarray:
    idx = np.asarray(index, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        logger.error(f"Op '{kind}' got an index outside [0, {size})")
        raise DimensionError(f"{kind}: index out of range for axis of size {size}")
    return idx


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        logger.error(f"matmul shape mismatch {a.shape} @ {b.shape}")
        raise DimensionError(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.values, b.values

    def backward(g: np.ndarray):
        return g @ bv.T, av.T @ g

    return _emit("matmul", av @ bv, (a, b), backward)


def spmm(sparse: SparseMatrix, h: Tensor) -> Tensor:
    """Sparse-dense product; differentiable in h and in tensor-backed sparse values."""
    if not isinstance(sparse, SparseMatrix):
        raise DimensionError("spmm: left operand must be a SparseMatrix")
    if sparse.cols != h.rows:
        logger.error(f"spmm shape mismatch {sparse.shape} @ {h.shape}")
        raise DimensionError(f"spmm: {sparse.shape} @ {h.shape}")
    csr = sparse.to_csr()
    hv = h.values
    out = np.asarray(csr @ hv)

    value_tensor = sparse.value_tensor
    if value_tensor is None:
        def backward(g: np.ndarray):
            return (np.asarray(csr.T @ g),)

        return _emit("spmm", out, (h,), backward)

    row_idx = sparse.row_indices()
    col_idx = sparse.col_idx

    def backward_values(g: np.ndarray):
        grad_values = np.empty((sparse.nnz, 1))
        for start in range(0, sparse.nnz, _SPMM_VALUE_CHUNK):
            stop = min(start + _SPMM_VALUE_CHUNK, sparse.nnz)
            grad_values[start:stop, 0] = np.einsum(
                "pc,pc->p", g[row_idx[start:stop]], hv[col_idx[start:stop]])
        return grad_values, np.asarray(csr.T @ g)

    return _emit("spmm", out, (value_tensor, h), backward_values)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit("add", a.values + b.values, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("sub", a, b)

    def backward(g: np.ndarray):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _emit("sub", a.values - b.values, (a, b), backward)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("hadamard", a, b)
    av, bv = a.values, b.values

    def backward(g: np.ndarray):
        return _unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)

    return _emit("hadamard", av * bv, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    def backward(g: np.ndarray):
        return (g * factor,)

    return _emit("scale", a.values * factor, (a,), backward)


def transpose(a: Tensor) -> Tensor:
    def backward(g: np.ndarray):
        return (g.T,)

    return _emit("transpose", a.values.T.copy(), (a,), backward)


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """Parametric ReLU with one slope per column."""
    if slope.shape != (1, x.cols):
        logger.error(f"prelu slope {slope.shape} does not match {x.cols} channels")
        raise DimensionError(f"prelu: slope must be (1, {x.cols}), got {slope.shape}")
    xv, sv = x.values, slope.values
    positive = xv > 0

    def backward(g: np.ndarray):
        grad_x = g * np.where(positive, 1.0, sv)
        grad_slope = (g * np.where(positive, 0.0, xv)).sum(axis=0, keepdims=True)
        return grad_x, grad_slope

    return _emit("prelu", np.where(positive, xv, sv * xv), (x, slope), backward)


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.values)

    def backward(g: np.ndarray):
        return (g * s * (1.0 - s),)

    return _emit("sigmoid", s, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.values)

    def backward(g: np.ndarray):
        return (g * (1.0 - t * t),)

    return _emit("tanh", t, (x,), backward)


def softplus(x: Tensor) -> Tensor:
    xv = x.values

    def backward(g: np.ndarray):
        return (g * expit(xv),)

    return _emit("softplus", np.logaddexp(0.0, xv), (x,), backward)


def softmax_rows(x: Tensor) -> Tensor:
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

    return _emit("softmax_rows", s, (x,), backward)


def log_softmax_rows(x: Tensor) -> Tensor:
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - log_z
    s = np.exp(out)

    def backward(g: np.ndarray):
        return (g - s * g.sum(axis=1, keepdims=True),)

    return _emit("log_softmax_rows", out, (x,), backward)


def colwise_standardize(x: Tensor, eps: float = STANDARDIZE_EPS) -> Tensor:
    """Per-column (x - mean) / sqrt(var + eps) with population variance."""
    xv = x.values
    n = x.rows
    centered = xv - xv.mean(axis=0, keepdims=True)
    std = np.sqrt((centered * centered).mean(axis=0, keepdims=True) + eps)
    xhat = centered / std

    def backward(g: np.ndarray):
        g_mean = g.mean(axis=0, keepdims=True)
        gx_mean = (g * xhat).sum(axis=0, keepdims=True) / n
        return ((g - g_mean - xhat * gx_mean) / std,)

    return _emit("colwise_standardize", xhat, (x,), backward)


def mean_rows(x: Tensor) -> Tensor:
    """Column means as a (1, c) row."""
    n = x.rows

    def backward(g: np.ndarray):
        return (np.broadcast_to(g / n, x.shape).copy(),)

    return _emit("mean_rows", x.values.mean(axis=0, keepdims=True), (x,), backward)


def sum_cols(x: Tensor) -> Tensor:
    """Row sums as an (r, 1) column."""
    def backward(g: np.ndarray):
        return (np.broadcast_to(g, x.shape).copy(),)

    return _emit("sum_cols", x.values.sum(axis=1, keepdims=True), (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(g: np.ndarray):
        return (np.full(x.shape, g[0, 0]),)

    return _emit("sum_all", np.array([[x.values.sum()]]), (x,), backward)


def mean_all(x: Tensor) -> Tensor:
    size = x.values.size

    def backward(g: np.ndarray):
        return (np.full(x.shape, g[0, 0] / size),)

    return _emit("mean_all", np.array([[x.values.mean()]]), (x,), backward)


def concat_cols(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise DimensionError("concat_cols: nothing to concatenate")
    rows = tensors[0].rows
    if any(t.rows != rows for t in tensors):
        logger.error(f"concat_cols row mismatch: {[t.shape for t in tensors]}")
        raise DimensionError(f"concat_cols: row counts differ {[t.shape for t in tensors]}")
    bounds = np.cumsum([0] + [t.cols for t in tensors])

    def backward(g: np.ndarray):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return _emit("concat_cols", np.concatenate([t.values for t in tensors], axis=1), tuple(tensors), backward)


def slice_rows(x: Tensor, index: Sequence[int] | np.ndarray) -> Tensor:
    """Row gather; indices may repeat, the backward pass scatter-adds."""
    idx = _index_array(index, x.rows, "slice_rows")

    def backward(g: np.ndarray):
        grad = np.zeros(x.shape)
        np.add.at(grad, idx, g)
        return (grad,)

    return _emit("slice_rows", x.values[idx], (x,), backward)


def slice_cols(x: Tensor, index: Sequence[int] | np.ndarray) -> Tensor:
    idx = _index_array(index, x.cols, "slice_cols")

    def backward(g: np.ndarray):
        grad = np.zeros(x.shape)
        np.add.at(grad.T, idx, g.T)
        return (grad,)

    return _emit("slice_cols", x.values[:, idx], (x,), backward)


def pick(x: Tensor, columns: Sequence[int] | np.ndarray) -> Tensor:
    """Selects x[i, columns[i]] for every row, as an (r, 1) column."""
    cols = _index_array(columns, x.cols, "pick")
    if cols.size != x.rows:
        raise DimensionError(f"pick: {cols.size} column ids for {x.rows} rows")
    rows = np.arange(x.rows)

    def backward(g: np.ndarray):
        grad = np.zeros(x.shape)
        grad[rows, cols] = g[:, 0]
        return (grad,)

    return _emit("pick", x.values[rows, cols].reshape(-1, 1), (x,), backward)


def log(x: Tensor) -> Tensor:
    xv = x.values
    if (xv <= 0).any():
        logger.error("log of a non-positive value")
        raise NumericError("Op 'log' received non-positive input")

    def backward(g: np.ndarray):
        return (g / xv,)

    return _emit("log", np.log(xv), (x,), backward)


def clamp(x: Tensor, low: float, high: float) -> Tensor:
    """Clips to [low, high]; entries outside the range get zero gradient."""
    xv = x.values
    inside = (xv >= low) & (xv <= high)

    def backward(g: np.ndarray):
        return (g * inside,)

    return _emit("clamp", np.clip(xv, low, high), (x,), backward)


def power(x: Tensor, exponent: float) -> Tensor:
    xv = x.values
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.power(xv, exponent)

    def backward(g: np.ndarray):
        return (g * exponent * np.power(xv, exponent - 1.0),)

    return _emit("power", out, (x,), backward)


_KINDS: dict[str, Callable[..., Tensor]] = {
    "matmul": matmul,
    "spmm": spmm,
    "add": add,
    "sub": sub,
    "hadamard": hadamard,
    "scale": scale,
    "transpose": transpose,
    "prelu": prelu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "softplus": softplus,
    "softmax_rows": softmax_rows,
    "log_softmax_rows": log_softmax_rows,
    "colwise_standardize": colwise_standardize,
    "mean_rows": mean_rows,
    "sum_cols": sum_cols,
    "sum_all": sum_all,
    "mean_all": mean_all,
    "slice_rows": slice_rows,
    "slice_cols": slice_cols,
    "pick": pick,
    "log": log,
    "clamp": clamp,
    "power": power,
}


def forward_op(kind: str, inputs: Sequence[Any], **attrs: Any) -> Tensor:
    """Applies an op by kind name, e.g. forward_op("spmm", [adj, h])."""
    if kind == "concat_cols":
        return concat_cols(list(inputs), **attrs)
    if kind not in _KINDS:
        logger.error(f"Unknown op kind '{kind}'")
        raise ValueError(f"Unknown op kind '{kind}'. Known kinds: {sorted([*_KINDS, 'concat_cols'])}")
    return _KINDS[kind](*inputs, **attrs)
