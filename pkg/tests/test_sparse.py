import numpy as np
import pytest

from abkd.errors import DegenerateDegreeError, ShapeError, StructuralError
from abkd.sparse import CsrMatrix, degree_vector, normalize_adjacency, spmm, spmm_t
from conftest import dense_normalize_oracle, random_symmetric_csr


class TestCsrMatrix:
    def test_from_coo_sorts_and_dedupes(self):
        m = CsrMatrix.from_coo(2, 3, [1, 0, 1, 1], [2, 1, 0, 2], [1.0, 2.0, 3.0, 4.0])
        m.validate()
        np.testing.assert_array_equal(m.row_ptr, [0, 1, 3])
        np.testing.assert_array_equal(m.col_idx, [1, 0, 2])
        np.testing.assert_array_equal(m.values, [2.0, 3.0, 5.0])

    def test_roundtrip_dense(self, rng):
        dense = np.where(rng.random((5, 7)) < 0.3, rng.standard_normal((5, 7)), 0.0)
        m = CsrMatrix.from_dense(dense)
        m.validate()
        np.testing.assert_array_equal(m.to_dense(), dense)

    def test_identity(self):
        np.testing.assert_array_equal(CsrMatrix.identity(4).to_dense(), np.eye(4))

    def test_transpose_symmetry(self, path3):
        assert path3.is_symmetric()
        asym = CsrMatrix.from_coo(2, 2, [0], [1])
        assert not asym.is_symmetric()

    def test_validate_rejects_bad_row_ptr(self):
        m = CsrMatrix(2, 2, np.array([0, 2, 1], dtype=np.int64),
                      np.array([0, 1], dtype=np.int64), np.ones(2))
        with pytest.raises(StructuralError):
            m.validate()

    def test_out_of_range_indices(self):
        with pytest.raises(StructuralError):
            CsrMatrix.from_coo(2, 2, [0], [5])


class TestNormalizeAdjacency:
    def test_two_node_single_edge(self):
        # one edge plus self-loops: every degree 2, every entry 1/2
        adj = CsrMatrix.from_coo(2, 2, [0, 1], [1, 0])
        out = normalize_adjacency(adj, add_self_loops=True)
        np.testing.assert_allclose(out.to_dense(), np.full((2, 2), 0.5), atol=1e-15)

    def test_empty_graph_gives_identity(self):
        adj = CsrMatrix.from_coo(3, 3, [], [])
        out = normalize_adjacency(adj, add_self_loops=True)
        np.testing.assert_array_equal(out.to_dense(), np.eye(3))

    def test_path3_entry(self, path3_norm):
        # degrees with self-loops are (2, 3, 2): entry (0,1) = 1/sqrt(6)
        entry = path3_norm.to_dense()[0, 1]
        assert abs(entry - 1.0 / np.sqrt(6.0)) < 1e-15

    def test_matches_dense_oracle_random(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 33))
            adj = random_symmetric_csr(rng, n)
            out = normalize_adjacency(adj, add_self_loops=True)
            expected = dense_normalize_oracle(adj.to_dense())
            np.testing.assert_allclose(out.to_dense(), expected, atol=1e-12)
            assert out.is_symmetric()
            assert np.all(out.values > 0) and np.all(out.values <= 1)

    def test_no_self_loops_variant(self, rng):
        adj = CsrMatrix.from_coo(3, 3, [0, 1, 1, 2, 0, 2], [1, 0, 2, 1, 2, 0])
        out = normalize_adjacency(adj, add_self_loops=False)
        expected = dense_normalize_oracle(adj.to_dense(), add_self_loops=False)
        np.testing.assert_allclose(out.to_dense(), expected, atol=1e-14)

    def test_non_square_rejected(self):
        with pytest.raises(StructuralError):
            normalize_adjacency(CsrMatrix.from_coo(2, 3, [0], [2]))

    def test_asymmetric_rejected(self):
        with pytest.raises(StructuralError):
            normalize_adjacency(CsrMatrix.from_coo(2, 2, [0], [1]))

    def test_isolated_node_without_self_loops(self):
        adj = CsrMatrix.from_coo(3, 3, [0, 1], [1, 0])  # node 2 isolated
        with pytest.raises(DegenerateDegreeError):
            normalize_adjacency(adj, add_self_loops=False)

    def test_degree_vector(self, path3):
        np.testing.assert_array_equal(degree_vector(path3, add_self_loops=True), [2, 3, 2])
        np.testing.assert_array_equal(degree_vector(path3, add_self_loops=False), [1, 2, 1])


class TestSpmm:
    def test_identity(self, rng):
        h = rng.standard_normal((4, 3))
        np.testing.assert_array_equal(spmm(CsrMatrix.identity(4), h), h)

    def test_half_matrix(self):
        sp = CsrMatrix.from_dense(np.full((2, 2), 0.5))
        np.testing.assert_array_equal(spmm(sp, np.eye(2)), np.full((2, 2), 0.5))

    def test_random_matches_dense(self, rng):
        for _ in range(20):
            dense_a = np.where(rng.random((8, 8)) < 0.4, rng.standard_normal((8, 8)), 0.0)
            h = rng.standard_normal((8, 4))
            np.testing.assert_allclose(spmm(CsrMatrix.from_dense(dense_a), h),
                                       dense_a @ h, atol=1e-12)

    def test_transpose_matches_dense(self, rng):
        dense_a = np.where(rng.random((6, 9)) < 0.4, rng.standard_normal((6, 9)), 0.0)
        h = rng.standard_normal((6, 3))
        np.testing.assert_allclose(spmm_t(CsrMatrix.from_dense(dense_a), h),
                                   dense_a.T @ h, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            spmm(CsrMatrix.identity(3), np.ones((4, 2)))
        with pytest.raises(ShapeError):
            spmm_t(CsrMatrix.identity(3), np.ones((4, 2)))

    def test_vertex_transitive_rows_equal(self):
        # a cycle is vertex transitive: propagating all-ones keeps rows equal
        n = 6
        src = list(range(n)) + [(i + 1) % n for i in range(n)]
        dst = [(i + 1) % n for i in range(n)] + list(range(n))
        cycle = CsrMatrix.from_coo(n, n, src, dst, sum_duplicates=False)
        out = spmm(normalize_adjacency(cycle), np.ones((n, 2)))
        np.testing.assert_allclose(out, np.tile(out[0], (n, 1)), atol=1e-12)
