from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

from muxfuse.errors import DimensionError
from muxfuse.ndauto.tensor import Tensor

logger = logging.getLogger(__name__)


class SparseMatrix:
    """Compressed sparse row matrix backed by scipy.

    The stored form is canonical: column indices are sorted and unique
    within each row. Values may be carried by a Tensor of shape (nnz, 1),
    in which case products with this matrix are differentiable with
    respect to those values.
    """

    def __init__(self,
                 csr: sp.spmatrix | sp.sparray,
                 value_tensor: Tensor | None = None):
        matrix = sp.csr_matrix(csr, dtype=np.float64, copy=True)
        matrix.sum_duplicates()
        matrix.sort_indices()
        self._csr: sp.csr_matrix = matrix
        self.value_tensor: Tensor | None = None
        if value_tensor is not None:
            self._attach(value_tensor)

    @classmethod
    def from_coo(cls,
                 rows: np.ndarray,
                 cols: np.ndarray,
                 values: np.ndarray,
                 shape: tuple[int, int]) -> SparseMatrix:
        """Builds a matrix from triplets; duplicate coordinates are summed."""
        coo = sp.coo_matrix((np.asarray(values, dtype=np.float64),
                             (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                            shape=shape)
        return cls(coo.tocsr())

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> SparseMatrix:
        return cls(sp.csr_matrix(np.asarray(dense, dtype=np.float64)))

    @classmethod
    def identity(cls, n: int) -> SparseMatrix:
        return cls(sp.identity(n, dtype=np.float64, format="csr"))

    def _attach(self, value_tensor: Tensor) -> None:
        if value_tensor.shape != (self.nnz, 1):
            logger.error(f"Value tensor {value_tensor.shape} does not match nnz={self.nnz}")
            raise DimensionError(f"Value tensor must have shape ({self.nnz}, 1), got {value_tensor.shape}")
        self.value_tensor = value_tensor

    def with_values(self, value_tensor: Tensor) -> SparseMatrix:
        """Returns a matrix with this sparsity pattern whose values come from a tensor."""
        pattern = SparseMatrix.__new__(SparseMatrix)
        pattern._csr = self._csr
        pattern.value_tensor = None
        pattern._attach(value_tensor)
        return pattern

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self._csr.shape[0]

    @property
    def cols(self) -> int:
        return self._csr.shape[1]

    @property
    def nnz(self) -> int:
        return int(self._csr.indptr[-1])

    @property
    def row_ptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def col_idx(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        if self.value_tensor is not None:
            return self.value_tensor.values[:, 0]
        return self._csr.data

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry, aligned with col_idx."""
        return np.repeat(np.arange(self.rows, dtype=np.int64), np.diff(self.row_ptr))

    def to_csr(self) -> sp.csr_matrix:
        if self.value_tensor is None:
            return self._csr
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def transpose(self) -> SparseMatrix:
        return SparseMatrix(self.to_csr().T)

    def __repr__(self) -> str:
        differentiable = self.value_tensor is not None
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz}, differentiable={differentiable})"
