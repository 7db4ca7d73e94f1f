"""Both kernel backends must agree with each other and the dense oracle."""

import numpy as np
import pytest

from abkd._kernels import BACKEND, numpy_ref
from conftest import random_symmetric_csr

try:
    from abkd._kernels import _csr_cy
except ImportError:
    _csr_cy = None

BACKENDS = [("numpy", numpy_ref)] + ([("cython", _csr_cy)] if _csr_cy else [])


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_matches_dense_oracle(name, impl, rng):
    for _ in range(20):
        n, m, d = rng.integers(1, 12, size=3)
        dense_a = np.where(rng.random((n, m)) < 0.4, rng.standard_normal((n, m)), 0.0)
        from abkd.sparse import CsrMatrix

        sp = CsrMatrix.from_dense(dense_a)
        h = rng.standard_normal((m, d))
        out = impl.csr_dense_matmul(sp.row_ptr, sp.col_idx, sp.values, np.ascontiguousarray(h))
        np.testing.assert_allclose(out, dense_a @ h, atol=1e-12)
        out_t = impl.csr_t_dense_matmul(sp.row_ptr, sp.col_idx, sp.values, sp.n_cols,
                                        np.ascontiguousarray(rng.standard_normal((n, d))))
        assert out_t.shape == (m, d)


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_empty_and_trailing_rows(name, impl):
    # rows 1 and 3 (trailing) are empty
    row_ptr = np.array([0, 2, 2, 3, 3], dtype=np.int64)
    col_idx = np.array([0, 2, 1], dtype=np.int64)
    values = np.array([1.0, 2.0, 3.0])
    h = np.arange(9, dtype=np.float64).reshape(3, 3)
    out = impl.csr_dense_matmul(row_ptr, col_idx, values, h)
    expected = np.array([[0, 1, 2], [0, 0, 0], [0, 0, 0], [0, 0, 0]], dtype=float)
    expected[0] = h[0] + 2 * h[2]
    expected[2] = 3 * h[1]
    np.testing.assert_array_equal(out, expected)


@pytest.mark.parametrize("name,impl", BACKENDS)
def test_all_empty(name, impl):
    row_ptr = np.zeros(4, dtype=np.int64)
    out = impl.csr_dense_matmul(row_ptr, np.zeros(0, dtype=np.int64), np.zeros(0), np.ones((5, 2)))
    np.testing.assert_array_equal(out, np.zeros((3, 2)))


@pytest.mark.skipif(_csr_cy is None, reason="compiled extension not built")
def test_backends_agree(rng):
    for _ in range(10):
        sp = random_symmetric_csr(rng, int(rng.integers(2, 20)))
        h = rng.standard_normal((sp.n_cols, 5))
        a = _csr_cy.csr_dense_matmul(sp.row_ptr, sp.col_idx, sp.values, np.ascontiguousarray(h))
        b = numpy_ref.csr_dense_matmul(sp.row_ptr, sp.col_idx, sp.values, np.ascontiguousarray(h))
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-14)
        at = _csr_cy.csr_t_dense_matmul(sp.row_ptr, sp.col_idx, sp.values, sp.n_cols,
                                        np.ascontiguousarray(h))
        bt = numpy_ref.csr_t_dense_matmul(sp.row_ptr, sp.col_idx, sp.values, sp.n_cols,
                                          np.ascontiguousarray(h))
        np.testing.assert_allclose(at, bt, rtol=1e-14, atol=1e-14)


def test_backend_reported():
    assert BACKEND in ("cython", "numpy")
