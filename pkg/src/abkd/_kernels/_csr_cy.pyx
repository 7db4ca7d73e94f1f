# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled CSR kernels: sparse @ dense and sparse^T @ dense.

Accumulation order is ascending column index within each row (the CSR
storage order), so results are bit-reproducible run to run.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def csr_dense_matmul(cnp.int64_t[::1] row_ptr,
                     cnp.int64_t[::1] col_idx,
                     double[::1] values,
                     double[:, ::1] dense):
    cdef Py_ssize_t n_rows = row_ptr.shape[0] - 1
    cdef Py_ssize_t d = dense.shape[1]
    out_arr = np.zeros((n_rows, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, j, c
    cdef double v
    for i in range(n_rows):
        for k in range(row_ptr[i], row_ptr[i + 1]):
            c = col_idx[k]
            v = values[k]
            for j in range(d):
                out[i, j] += v * dense[c, j]
    return out_arr


def csr_t_dense_matmul(cnp.int64_t[::1] row_ptr,
                       cnp.int64_t[::1] col_idx,
                       double[::1] values,
                       Py_ssize_t n_cols,
                       double[:, ::1] dense):
    cdef Py_ssize_t n_rows = row_ptr.shape[0] - 1
    cdef Py_ssize_t d = dense.shape[1]
    out_arr = np.zeros((n_cols, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, j, c
    cdef double v
    for i in range(n_rows):
        for k in range(row_ptr[i], row_ptr[i + 1]):
            c = col_idx[k]
            v = values[k]
            for j in range(d):
                out[c, j] += v * dense[i, j]
    return out_arr
