"""Compressed sparse row matrices and symmetric adjacency normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import csr_dense_matmul, csr_t_dense_matmul
from .errors import DegenerateDegreeError, ShapeError, StructuralError


@dataclass
class CsrMatrix:
    """CSR matrix with int64 indices and float64 values.

    Invariants: row_ptr is non-decreasing with row_ptr[0] == 0 and
    row_ptr[-1] == nnz; column indices are strictly increasing within
    each row and all < n_cols.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, values=None, sum_duplicates=True):
        """Build from coordinate triples; entries are sorted and deduplicated."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if values is None:
            values = np.ones(rows.shape[0], dtype=np.float64)
        else:
            values = np.asarray(values, dtype=np.float64)
        if rows.shape != cols.shape or rows.shape != values.shape:
            raise ShapeError("rows, cols and values must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise StructuralError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
            raise StructuralError("column index out of range")

        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if rows.size:
            keep = np.ones(rows.size, dtype=bool)
            keep[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            if not keep.all():
                if sum_duplicates:
                    group = np.cumsum(keep) - 1
                    summed = np.zeros(int(group[-1]) + 1, dtype=np.float64)
                    np.add.at(summed, group, values)
                    rows, cols = rows[keep], cols[keep]
                    values = summed
                else:
                    rows, cols, values = rows[keep], cols[keep], values[keep]

        row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(n_rows, n_cols, row_ptr, cols, values)

    @classmethod
    def identity(cls, n: int) -> "CsrMatrix":
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    @classmethod
    def from_dense(cls, dense) -> "CsrMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        return cls.from_coo(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols])

    def to_coo(self):
        rows = np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_ptr))
        return rows, self.col_idx.copy(), self.values.copy()

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        rows, cols, vals = self.to_coo()
        out[rows, cols] = vals
        return out

    def transpose(self) -> "CsrMatrix":
        rows, cols, vals = self.to_coo()
        return CsrMatrix.from_coo(self.n_cols, self.n_rows, cols, rows, vals)

    def is_symmetric(self) -> bool:
        if self.n_rows != self.n_cols:
            return False
        t = self.transpose()
        return (
            np.array_equal(t.row_ptr, self.row_ptr)
            and np.array_equal(t.col_idx, self.col_idx)
            and np.array_equal(t.values, self.values)
        )

    def has_diagonal_entries(self) -> bool:
        rows, cols, _ = self.to_coo()
        return bool(np.any(rows == cols))

    def validate(self):
        if self.row_ptr.shape[0] != self.n_rows + 1 or self.row_ptr[0] != 0:
            raise StructuralError("row_ptr must have length n_rows+1 and start at 0")
        if np.any(np.diff(self.row_ptr) < 0):
            raise StructuralError("row_ptr must be non-decreasing")
        if self.row_ptr[-1] != self.col_idx.shape[0] or self.col_idx.shape[0] != self.values.shape[0]:
            raise StructuralError("row_ptr[-1] must equal len(col_idx) == len(values)")
        if self.col_idx.size and (self.col_idx.min() < 0 or self.col_idx.max() >= self.n_cols):
            raise StructuralError("column index out of range")
        for i in range(self.n_rows):
            s, e = self.row_ptr[i], self.row_ptr[i + 1]
            if e - s > 1 and np.any(np.diff(self.col_idx[s:e]) <= 0):
                raise StructuralError(f"column indices not strictly increasing in row {i}")


def degree_vector(adj: CsrMatrix, add_self_loops: bool = True) -> np.ndarray:
    """Row sums of A (+I when add_self_loops); must be positive for normalization."""
    deg = np.zeros(adj.n_rows)
    rows, _, vals = adj.to_coo()
    np.add.at(deg, rows, vals)
    if add_self_loops:
        deg += 1.0
    return deg


def normalize_adjacency(adj: CsrMatrix, add_self_loops: bool = True) -> CsrMatrix:
    """Symmetrically normalize an adjacency matrix: D^{-1/2} (A + I?) D^{-1/2}.

    The input must be square and symmetric. Without self-loops an isolated
    node has zero degree and normalization is undefined.
    """
    if adj.n_rows != adj.n_cols:
        raise StructuralError("adjacency must be square")
    if not adj.is_symmetric():
        raise StructuralError("adjacency must be symmetric")
    rows, cols, vals = adj.to_coo()
    if add_self_loops:
        diag = np.arange(adj.n_rows, dtype=np.int64)
        rows = np.concatenate([rows, diag])
        cols = np.concatenate([cols, diag])
        vals = np.concatenate([vals, np.ones(adj.n_rows)])
    aug = CsrMatrix.from_coo(adj.n_rows, adj.n_cols, rows, cols, vals)
    deg = degree_vector(aug, add_self_loops=False)
    if np.any(deg <= 0):
        bad = int(np.argmax(deg <= 0))
        raise DegenerateDegreeError(
            f"node {bad} has degree {deg[bad]}; enable self-loops or remove isolated nodes"
        )
    inv_sqrt = 1.0 / np.sqrt(deg)
    r2, c2, v2 = aug.to_coo()
    return CsrMatrix(adj.n_rows, adj.n_cols, aug.row_ptr, aug.col_idx, v2 * inv_sqrt[r2] * inv_sqrt[c2])


def spmm(sparse: CsrMatrix, dense: np.ndarray) -> np.ndarray:
    """Sparse @ dense with deterministic per-row accumulation order."""
    dense = np.ascontiguousarray(dense, dtype=np.float64)
    if dense.ndim != 2 or sparse.n_cols != dense.shape[0]:
        raise ShapeError(
            f"cannot multiply {sparse.n_rows}x{sparse.n_cols} sparse by dense {dense.shape}"
        )
    return csr_dense_matmul(sparse.row_ptr, sparse.col_idx, sparse.values, dense)


def spmm_t(sparse: CsrMatrix, dense: np.ndarray) -> np.ndarray:
    """Sparse^T @ dense; used by the reverse pass of the autodiff spmm."""
    dense = np.ascontiguousarray(dense, dtype=np.float64)
    if dense.ndim != 2 or sparse.n_rows != dense.shape[0]:
        raise ShapeError(
            f"cannot multiply transposed {sparse.n_rows}x{sparse.n_cols} sparse by dense {dense.shape}"
        )
    return csr_t_dense_matmul(sparse.row_ptr, sparse.col_idx, sparse.values, sparse.n_cols, dense)
