import numpy as np
import pytest

from abkd.sparse import CsrMatrix, normalize_adjacency


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3():
    """3-node path graph: edges 0-1 and 1-2."""
    return CsrMatrix.from_coo(3, 3, [0, 1, 1, 2], [1, 0, 2, 1])


@pytest.fixture
def path3_norm(path3):
    return normalize_adjacency(path3, add_self_loops=True)


def random_symmetric_csr(rng, n, p=0.3):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return CsrMatrix.from_coo(
        n, n,
        np.concatenate([iu[keep], ju[keep]]),
        np.concatenate([ju[keep], iu[keep]]),
        sum_duplicates=False,
    )


def dense_normalize_oracle(adj_dense, add_self_loops=True):
    """Dense-matrix reference for the symmetric normalization."""
    a = np.asarray(adj_dense, dtype=float).copy()
    if add_self_loops:
        a = a + np.eye(a.shape[0])
    deg = a.sum(axis=1)
    inv = 1.0 / np.sqrt(deg)
    return inv[:, None] * a * inv[None, :]
