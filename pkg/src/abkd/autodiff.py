"""Dense 2-D tensors with reverse-mode automatic differentiation.

Every operation records a node on an explicit Tape when any input is
attached to one; backward() then walks the nodes in strict reverse
insertion order, accumulating gradients. Only 2-D float64 tensors are
supported; the layer-stacked third dimension used elsewhere is always
represented as a list of 2-D tensors.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ContractError,
    DegenerateVectorError,
    DomainError,
    NumericError,
    ParameterError,
    ShapeError,
)
from .sparse import CsrMatrix, spmm as _spmm_forward, spmm_t as _spmm_backward


class Tensor:
    """A rows x cols float64 matrix, optionally attached to a tape node.

    The wrapped array is shared, not copied, whenever the input is already
    a C-contiguous float64 matrix; training code relies on this to update
    parameters in place between steps.
    """

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"tensors must be 2-D, got shape {arr.shape}")
        self.data = arr
        self.tape = None
        self.node_id = None

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_attached(self) -> bool:
        return self.tape is not None

    def detach(self) -> "Tensor":
        """New tensor sharing this data, not attached to any tape."""
        return Tensor(self.data)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 tensor, got {self.data.shape}")
        return float(self.data[0, 0])

    def has_nonfinite(self) -> bool:
        return not bool(np.isfinite(self.data).all())

    def assert_finite(self, what="tensor"):
        if self.has_nonfinite():
            raise NumericError(f"{what} contains NaN or Inf")

    def __repr__(self):
        tag = f", node={self.node_id}" if self.tape is not None else ""
        return f"Tensor({self.rows}x{self.cols}{tag})"


class _Node:
    __slots__ = ("inputs", "backward")

    def __init__(self, inputs, backward):
        self.inputs = inputs  # node ids on the same tape, -1 for detached inputs
        self.backward = backward  # g -> per-input gradient contributions, None for leaves


class Tape:
    """Ordered record of operations; insertion order is topological order."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._watched: list[Tensor] = []

    def __len__(self):
        return len(self._nodes)

    def _push(self, inputs, backward) -> int:
        self._nodes.append(_Node(inputs, backward))
        return len(self._nodes) - 1

    def watch(self, t: Tensor) -> Tensor:
        """Register t as a trainable leaf on this tape (idempotent)."""
        if t.tape is self:
            return t
        t.tape = self
        t.node_id = self._push((), None)
        self._watched.append(t)
        return t


class Gradients:
    """Gradient lookup for tensors attached to the tape that was differentiated."""

    def __init__(self, tape: Tape, by_node: dict):
        self._tape = tape
        self._by_node = by_node

    def __getitem__(self, t: Tensor) -> np.ndarray:
        if t.tape is not self._tape or t.node_id is None:
            raise ContractError("tensor is not attached to the differentiated tape")
        if t.node_id not in self._by_node:
            raise ContractError("no gradient recorded for this tensor")
        return self._by_node[t.node_id]

    def __setitem__(self, t: Tensor, value: np.ndarray):
        self[t]  # validate membership
        self._by_node[t.node_id] = np.asarray(value)


def _record(inputs: Sequence[Tensor], out_data: np.ndarray, backward) -> Tensor:
    """Wrap out_data; record the op when any input is attached."""
    tape = None
    for t in inputs:
        if t.tape is not None:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ContractError("operation inputs are attached to different tapes")
    out = Tensor(out_data)
    if tape is not None:
        ids = tuple(t.node_id if t.tape is tape else -1 for t in inputs)
        out.tape = tape
        out.node_id = tape._push(ids, backward)
    return out


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Reverse sweep from a scalar loss; accumulates += on shared inputs."""
    if loss.tape is not tape or loss.node_id is None:
        raise ContractError("loss is not attached to this tape")
    if loss.data.shape != (1, 1):
        raise ContractError(f"loss must be a 1x1 scalar, got {loss.data.shape}")
    grads: list = [None] * len(tape._nodes)
    grads[loss.node_id] = np.ones((1, 1))
    for nid in range(loss.node_id, -1, -1):
        g = grads[nid]
        node = tape._nodes[nid]
        if g is None or node.backward is None:
            continue
        for in_id, contrib in zip(node.inputs, node.backward(g)):
            if in_id < 0 or contrib is None:
                continue
            if grads[in_id] is None:
                grads[in_id] = contrib
            else:
                grads[in_id] = grads[in_id] + contrib
    by_node = {}
    for t in tape._watched:
        g = grads[t.node_id]
        by_node[t.node_id] = np.zeros_like(t.data) if g is None else np.asarray(g)
    return Gradients(tape, by_node)


# ---------------------------------------------------------------------------
# operations


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shapes differ: {a.shape} vs {b.shape}")
    return _record((a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub shapes differ: {a.shape} vs {b.shape}")
    return _record((a, b), a.data - b.data, lambda g: (g, -g))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _record((a,), c * a.data, lambda g: (c * g,))


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"elementwise_mul shapes differ: {a.shape} vs {b.shape}")
    ad, bd = a.data, b.data
    return _record((a, b), ad * bd, lambda g: (g * bd, g * ad))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError(f"matmul shapes incompatible: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _record((a, b), ad @ bd, lambda g: (g @ bd.T, ad.T @ g))


def transpose(a: Tensor) -> Tensor:
    return _record((a,), a.data.T.copy(), lambda g: (np.ascontiguousarray(g.T),))


def spmm_ad(s: CsrMatrix, h: Tensor) -> Tensor:
    """Sparse @ dense; the sparse factor is a constant (no gradient)."""
    out = _spmm_forward(s, h.data)
    return _record((h,), out, lambda g: (_spmm_backward(s, g),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0  # subgradient at 0 is 0
    return _record((a,), np.where(mask, a.data, 0.0), lambda g: (g * mask,))


def row_softmax(a: Tensor) -> Tensor:
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return _record((a,), p, back)


def mean_rows(a: Tensor) -> Tensor:
    """Mean across rows: rows x cols -> 1 x cols."""
    n = a.rows
    out = a.data.mean(axis=0, keepdims=True)
    return _record((a,), out, lambda g: (np.repeat(g / n, n, axis=0),))


def mean_cols(a: Tensor) -> Tensor:
    """Mean across columns: rows x cols -> rows x 1."""
    n = a.cols
    out = a.data.mean(axis=1, keepdims=True)
    return _record((a,), out, lambda g: (np.repeat(g / n, n, axis=1),))


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    out = np.array([[a.data.sum()]])
    return _record((a,), out, lambda g: (np.full(shape, g[0, 0]),))


def squared_l2_of_rows_mean(a: Tensor) -> Tensor:
    """Mean over rows of the squared L2 norm of each row (a 1x1 scalar)."""
    n = a.rows
    ad = a.data
    out = np.array([[(ad * ad).sum() / n]])
    return _record((a,), out, lambda g: ((2.0 / n) * g[0, 0] * ad,))


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ContractError("concat_rows needs at least one tensor")
    cols = parts[0].cols
    if any(p.cols != cols for p in parts):
        raise ShapeError("concat_rows requires equal column counts")
    offsets = np.cumsum([0] + [p.rows for p in parts])

    def back(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _record(tuple(parts), np.vstack([p.data for p in parts]), back)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ContractError("concat_cols needs at least one tensor")
    rows = parts[0].rows
    if any(p.rows != rows for p in parts):
        raise ShapeError("concat_cols requires equal row counts")
    offsets = np.cumsum([0] + [p.cols for p in parts])

    def back(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _record(tuple(parts), np.hstack([p.data for p in parts]), back)


def _masked_indices(n_rows, mask):
    if mask is None:
        return np.arange(n_rows)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[0] != n_rows:
        raise ShapeError(f"mask length {mask.shape[0]} != {n_rows} rows")
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ContractError("mask selects no rows")
    return idx


def cross_entropy_with_logits(logits: Tensor, labels, mask=None) -> Tensor:
    """Mean cross-entropy between logits rows and integer labels over the mask."""
    labels = np.asarray(labels)
    if labels.shape[0] != logits.rows:
        raise ShapeError("one label per logits row required")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.cols):
        raise DomainError(f"label outside [0, {logits.cols})")
    idx = _masked_indices(logits.rows, mask)
    z = logits.data[idx]
    zmax = z.max(axis=1, keepdims=True)
    stable = z - zmax
    lse = np.log(np.exp(stable).sum(axis=1, keepdims=True)) + zmax
    picked = z[np.arange(idx.size), labels[idx]]
    out = np.array([[float((lse[:, 0] - picked).mean())]])

    p = np.exp(z - lse)
    dmasked = p.copy()
    dmasked[np.arange(idx.size), labels[idx]] -= 1.0
    dmasked /= idx.size
    shape = logits.shape

    def back(g):
        d = np.zeros(shape)
        d[idx] = g[0, 0] * dmasked
        return (d,)

    return _record((logits,), out, back)


def soft_target_kl(logits: Tensor, target_probs: np.ndarray, mask=None) -> Tensor:
    """KL(targets || softmax(logits)), averaged over masked rows.

    The targets are constant probability rows; the value is zero exactly
    when the predicted distribution matches the targets, and it differs
    from the plain soft cross-entropy only by the target entropy, which
    does not depend on the logits.
    """
    t = np.asarray(target_probs, dtype=np.float64)
    if t.shape != logits.shape:
        raise ShapeError(f"target shape {t.shape} != logits shape {logits.shape}")
    idx = _masked_indices(logits.rows, mask)
    z = logits.data[idx]
    ti = t[idx]
    zmax = z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z - zmax).sum(axis=1, keepdims=True)) + zmax
    logp = z - lse
    tlogt = np.where(ti > 0, ti * np.log(np.where(ti > 0, ti, 1.0)), 0.0)
    out = np.array([[float((tlogt - ti * logp).sum(axis=1).mean())]])

    p = np.exp(logp)
    dmasked = (p - ti) / idx.size
    shape = logits.shape

    def back(g):
        d = np.zeros(shape)
        d[idx] = g[0, 0] * dmasked
        return (d,)

    return _record((logits,), out, back)


def cosine_rowmean_distance(a: Tensor, b: Tensor) -> Tensor:
    """1 - cosine similarity between the row-means of a and b."""
    if a.cols != b.cols:
        raise ShapeError(f"column counts differ: {a.cols} vs {b.cols}")
    u = a.data.mean(axis=0)
    v = b.data.mean(axis=0)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < 1e-300 or nv < 1e-300:
        raise DegenerateVectorError("cosine distance undefined for a zero-norm row-mean")
    cos = float(u @ v) / (nu * nv)
    out = np.array([[1.0 - cos]])
    du = -(v / (nu * nv) - cos * u / (nu * nu))
    dv = -(u / (nu * nv) - cos * v / (nv * nv))
    na, nb = a.rows, b.rows

    def back(g):
        return (
            np.repeat(g[0, 0] * du[None, :] / na, na, axis=0),
            np.repeat(g[0, 0] * dv[None, :] / nb, nb, axis=0),
        )

    return _record((a, b), out, back)


def finite_diff_grad(f: Callable[[Tensor], float], w: Tensor, eps: float = 1e-6) -> Tensor:
    """Central-difference gradient of a scalar function, entry by entry."""
    if eps <= 0:
        raise ParameterError("eps must be positive")
    base = w.data
    grad = np.zeros_like(base)
    for i, j in np.ndindex(base.shape):
        plus = base.copy()
        plus[i, j] += eps
        minus = base.copy()
        minus[i, j] -= eps
        fp = float(f(Tensor(plus)))
        fm = float(f(Tensor(minus)))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite evaluation at entry ({i}, {j})")
        grad[i, j] = (fp - fm) / (2.0 * eps)
    return Tensor(grad)


# ---------------------------------------------------------------------------
# binary serialization: magic, uint64 rows, uint64 cols, row-major float64

_MAGIC = b"NDT1"
_HEADER = struct.Struct("<QQ")


def write_tensor(fh, t: Tensor):
    fh.write(_MAGIC)
    fh.write(_HEADER.pack(t.rows, t.cols))
    fh.write(np.ascontiguousarray(t.data).tobytes())


def read_tensor(fh, allow_eof: bool = False) -> Tensor | None:
    magic = fh.read(4)
    if not magic and allow_eof:
        return None
    if magic != _MAGIC:
        raise ContractError(f"bad tensor magic {magic!r}")
    rows, cols = _HEADER.unpack(fh.read(_HEADER.size))
    payload = fh.read(rows * cols * 8)
    if len(payload) != rows * cols * 8:
        raise ContractError("truncated tensor payload")
    return Tensor(np.frombuffer(payload, dtype="<f8").reshape(rows, cols).copy())


def save_tensors(path, tensors: Sequence[Tensor]):
    with open(Path(path), "wb") as fh:
        for t in tensors:
            write_tensor(fh, t)


def load_tensors(path) -> list[Tensor]:
    out = []
    with open(Path(path), "rb") as fh:
        while True:
            t = read_tensor(fh, allow_eof=True)
            if t is None:
                break
            out.append(t)
    return out
