"""Graph datasets: citation-file ingestion and synthetic block-model graphs."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyDatasetError, ParameterError, ParseError, StructuralError
from .sparse import CsrMatrix

log = logging.getLogger(__name__)

MAX_SBM_NODES = 5000  # dense pair enumeration; desk-scale guard


@dataclass
class GraphDataset:
    """Raw symmetric adjacency (no self-loops) plus node features, labels, splits."""

    adjacency: CsrMatrix
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.adjacency.n_rows

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def validate(self):
        n = self.n_nodes
        if self.adjacency.n_rows != self.adjacency.n_cols:
            raise StructuralError("adjacency must be square")
        if not self.adjacency.is_symmetric():
            raise StructuralError("adjacency must be symmetric")
        if self.adjacency.has_diagonal_entries():
            raise StructuralError("adjacency must not contain self-loops")
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise StructuralError("features and labels must cover every node")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise StructuralError("label outside [0, n_classes)")
        for m in (self.train_mask, self.val_mask, self.test_mask):
            if m.shape[0] != n or m.dtype != bool:
                raise StructuralError("masks must be boolean vectors of length n")
        overlap = (
            (self.train_mask & self.val_mask)
            | (self.train_mask & self.test_mask)
            | (self.val_mask & self.test_mask)
        )
        if overlap.any():
            raise StructuralError("train/val/test masks must be pairwise disjoint")

    @property
    def n_undirected_edges(self) -> int:
        return self.adjacency.nnz // 2


def make_stratified_masks(labels, fractions=(0.6, 0.2, 0.2), seed=0):
    """Per-class shuffled split into train/val/test masks (floor rounding)."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    n = labels.shape[0]
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = rng.permutation(idx)
        n_tr = int(fractions[0] * idx.size)
        n_va = int(fractions[1] * idx.size)
        train[idx[:n_tr]] = True
        val[idx[n_tr:n_tr + n_va]] = True
        test[idx[n_tr + n_va:]] = True
    return train, val, test


def _read_split_file(path, id_to_index):
    with open(path) as fh:
        raw = json.load(fh)
    masks = []
    n = len(id_to_index)
    for key in ("train", "val", "test"):
        m = np.zeros(n, dtype=bool)
        for node_id in raw.get(key, []):
            if str(node_id) not in id_to_index:
                raise ParseError(f"split file references unknown node id {node_id!r}")
            m[id_to_index[str(node_id)]] = True
        masks.append(m)
    return tuple(masks)


def load_citation_dataset(
    content_path,
    cites_path,
    normalize_features: bool = True,
    split_seed: int = 0,
    split_path=None,
) -> GraphDataset:
    """Load a tab-separated citation dataset.

    Content lines are ``<id>\\t<features...>\\t<label>``; cites lines are
    ``<cited>\\t<citing>``. Features are L1-normalized per row (zero rows are
    left untouched) unless normalize_features is False. Labels are mapped to
    dense indices in first-seen order. Edges are symmetrized and
    deduplicated; citations of unknown ids (and self-citations) are skipped
    with a logged count.
    """
    ids = []
    id_to_index = {}
    feature_rows = []
    label_names = []
    label_index = {}
    labels = []
    n_fields = None

    with open(content_path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if n_fields is None:
                n_fields = len(parts)
                if n_fields < 3:
                    raise ParseError("content line needs id, >=1 feature, label", line_no)
            elif len(parts) != n_fields:
                raise ParseError(
                    f"expected {n_fields} tab-separated fields, found {len(parts)}", line_no
                )
            node_id, feats, label = parts[0], parts[1:-1], parts[-1]
            if node_id in id_to_index:
                raise ParseError(f"duplicate node id {node_id!r}", line_no)
            try:
                row = np.array([float(v) for v in feats])
            except ValueError as exc:
                raise ParseError(f"bad feature value ({exc})", line_no) from None
            id_to_index[node_id] = len(ids)
            ids.append(node_id)
            feature_rows.append(row)
            if label not in label_index:
                label_index[label] = len(label_names)
                label_names.append(label)
            labels.append(label_index[label])

    if not ids:
        raise EmptyDatasetError(f"no nodes found in {content_path}")

    n = len(ids)
    features = np.vstack(feature_rows)
    if normalize_features:
        sums = np.abs(features).sum(axis=1, keepdims=True)
        nonzero = sums[:, 0] > 0
        features[nonzero] /= sums[nonzero]

    skipped = 0
    src, dst = [], []
    with open(cites_path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("cites line must be <cited>\\t<citing>", line_no)
            cited, citing = parts
            if cited not in id_to_index or citing not in id_to_index:
                skipped += 1
                continue
            a, b = id_to_index[cited], id_to_index[citing]
            if a == b:
                skipped += 1
                continue
            src.extend((a, b))
            dst.extend((b, a))
    if skipped:
        log.warning("skipped %d citation lines (unknown ids or self-citations)", skipped)

    adjacency = CsrMatrix.from_coo(n, n, src, dst, sum_duplicates=False)
    if split_path is not None:
        train, val, test = _read_split_file(split_path, id_to_index)
    else:
        train, val, test = make_stratified_masks(labels, seed=split_seed)
    ds = GraphDataset(
        adjacency=adjacency,
        features=features,
        labels=np.array(labels, dtype=np.int64),
        n_classes=len(label_names),
        train_mask=train,
        val_mask=val,
        test_mask=test,
    )
    ds.validate()
    return ds


def generate_sbm(
    n_per_block: int,
    n_blocks: int,
    p_in: float,
    p_out: float,
    n_features: int,
    signal: float,
    seed: int,
) -> GraphDataset:
    """Planted-community graph with Gaussian-noised one-hot block features.

    Edges are drawn independently with probability p_in inside a block and
    p_out across blocks. Node features are signal * onehot(block) plus unit
    Gaussian noise (block index taken mod n_features). Labels are block ids;
    masks are a 60/20/20 stratified split. Bit-reproducible under seed.
    """
    if n_per_block < 1 or n_blocks < 1:
        raise ParameterError("n_per_block and n_blocks must be positive")
    n = n_per_block * n_blocks
    if n > MAX_SBM_NODES:
        raise ParameterError(f"{n} nodes exceeds the desk-scale cap of {MAX_SBM_NODES}")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ParameterError("need 0 <= p_out < p_in <= 1")
    if signal < 0:
        raise ParameterError("signal must be non-negative")
    if n_features < 1:
        raise ParameterError("n_features must be positive")

    rng = np.random.default_rng(seed)
    blocks = np.repeat(np.arange(n_blocks), n_per_block)

    iu, ju = np.triu_indices(n, k=1)
    p = np.where(blocks[iu] == blocks[ju], p_in, p_out)
    keep = rng.random(iu.size) < p
    src, dst = iu[keep], ju[keep]
    adjacency = CsrMatrix.from_coo(
        n, n, np.concatenate([src, dst]), np.concatenate([dst, src]), sum_duplicates=False
    )

    means = np.zeros((n, n_features))
    means[np.arange(n), blocks % n_features] = signal
    features = means + rng.standard_normal((n, n_features))

    train, val, test = _stratified_masks_from_rng(blocks, rng)
    ds = GraphDataset(
        adjacency=adjacency,
        features=features,
        labels=blocks.astype(np.int64),
        n_classes=n_blocks,
        train_mask=train,
        val_mask=val,
        test_mask=test,
    )
    ds.validate()
    return ds


def _stratified_masks_from_rng(labels, rng, fractions=(0.6, 0.2, 0.2)):
    n = labels.shape[0]
    train = np.zeros(n, dtype=bool)
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_tr = int(fractions[0] * idx.size)
        n_va = int(fractions[1] * idx.size)
        train[idx[:n_tr]] = True
        val[idx[n_tr:n_tr + n_va]] = True
        test[idx[n_tr + n_va:]] = True
    return train, val, test


def save_citation_format(dataset: GraphDataset, prefix) -> tuple[Path, Path]:
    """Write a dataset in the citation file format (for round-trip tests).

    Node ids are ``n<i>`` and labels ``class_<k>``; each undirected edge is
    written once. Feature values use 17 significant digits so a reload with
    normalize_features=False reproduces them exactly.
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    content = prefix.with_suffix(".content")
    cites = prefix.with_suffix(".cites")
    with open(content, "w") as fh:
        for i in range(dataset.n_nodes):
            feats = "\t".join(f"{v:.17g}" for v in dataset.features[i])
            fh.write(f"n{i}\t{feats}\tclass_{dataset.labels[i]}\n")
    rows, cols, _ = dataset.adjacency.to_coo()
    with open(cites, "w") as fh:
        for r, c in zip(rows, cols):
            if r < c:
                fh.write(f"n{r}\tn{c}\n")
    return content, cites
