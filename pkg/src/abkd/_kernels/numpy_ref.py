"""Numpy reference implementations of the CSR kernels.

These are the fallback used when the compiled extension is unavailable
(or when ABKD_PURE_PYTHON=1). Per-row summation runs in CSR storage
order, i.e. ascending column index within each row, which matches the
compiled kernels.
"""

import numpy as np


def csr_dense_matmul(row_ptr, col_idx, values, dense):
    """(sparse n_rows x n_cols) @ (dense n_cols x d) -> n_rows x d."""
    n_rows = row_ptr.shape[0] - 1
    out = np.zeros((n_rows, dense.shape[1]), dtype=np.float64)
    nnz = values.shape[0]
    if nnz == 0:
        return out
    contrib = values[:, None] * dense[col_idx]
    starts = row_ptr[:-1]
    # reduceat rejects start == nnz (trailing empty rows) and returns
    # contrib[start] for interior empty segments, so feed it only the
    # in-range starts and keep only the rows with a real segment.
    valid = starts < nnz
    seg = np.add.reduceat(contrib, starts[valid], axis=0)
    keep = (row_ptr[1:] > starts)[valid]
    out[np.flatnonzero(valid)[keep]] = seg[keep]
    return out


def csr_t_dense_matmul(row_ptr, col_idx, values, n_cols, dense):
    """(sparse n_rows x n_cols)^T @ (dense n_rows x d) -> n_cols x d."""
    n_rows = row_ptr.shape[0] - 1
    out = np.zeros((n_cols, dense.shape[1]), dtype=np.float64)
    if values.shape[0] == 0:
        return out
    row_of = np.repeat(np.arange(n_rows), np.diff(row_ptr))
    # add.at is unbuffered and applies contributions in storage order.
    np.add.at(out, col_idx, values[:, None] * dense[row_of])
    return out
