"""Multi-layer graph convolutional models exposing per-layer pre-activations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, ShapeError
from .seeding import glorot_uniform, make_rng
from .sparse import CsrMatrix


class GcnLayer:
    """One graph convolution: propagate(features @ weight). No bias."""

    def __init__(self, weight: Tensor):
        self.weight = weight

    @property
    def d_in(self) -> int:
        return self.weight.rows

    @property
    def d_out(self) -> int:
        return self.weight.cols


class GcnModel:
    """Stack of GcnLayers: features -> hidden (ReLU) -> ... -> class logits.

    The hidden layers apply ReLU to their pre-activation; the final layer
    does not, so its pre-activation equals the logits.
    """

    def __init__(self, layers: list[GcnLayer], hidden_dim: int | None = None, seed: int | None = None):
        if not layers:
            raise ContractError("a model needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.d_out != nxt.d_in:
                raise ShapeError(f"layer dims do not chain: {prev.d_out} -> {nxt.d_in}")
        self.layers = layers
        self.hidden_dim = hidden_dim if hidden_dim is not None else layers[0].d_out
        self.seed = seed

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].d_in] + [l.d_out for l in self.layers]

    @property
    def layer_out_dims(self) -> list[int]:
        return [l.d_out for l in self.layers]

    def weights(self) -> list[Tensor]:
        return [l.weight for l in self.layers]

    def copy(self) -> "GcnModel":
        return GcnModel([GcnLayer(l.weight.copy()) for l in self.layers], self.hidden_dim, self.seed)

    @classmethod
    def create(cls, dims: list[int], seed: int) -> "GcnModel":
        """Glorot-uniform initialized model for dims [f, h1, ..., n_classes]."""
        if len(dims) < 2:
            raise ContractError("dims must list at least input and output width")
        rng = make_rng(seed)
        layers = [GcnLayer(Tensor(glorot_uniform(rng, a, b))) for a, b in zip(dims, dims[1:])]
        hidden = dims[1] if len(dims) > 2 else dims[1]
        return cls(layers, hidden_dim=hidden, seed=seed)

    @classmethod
    def create_arch(cls, n_features, hidden_dim, n_layers, n_classes, seed) -> "GcnModel":
        """L-layer model: f -> hidden x (L-1) -> n_classes."""
        if n_layers < 1:
            raise ContractError("n_layers must be >= 1")
        dims = [n_features] + [hidden_dim] * (n_layers - 1) + [n_classes]
        return cls.create(dims, seed)


@dataclass
class ForwardRecord:
    """Logits plus the pre-activation of every layer (when captured)."""

    logits: Tensor
    pre_activations: list[Tensor]


def forward(model: GcnModel, a_hat: CsrMatrix, x: Tensor, capture: bool = False,
            tape: ad.Tape | None = None) -> ForwardRecord:
    """Run the model over a normalized adjacency.

    With a tape, layer weights are watched so gradients reach them; without
    one, weights are used detached so nothing is recorded. capture=True
    retains each layer's pre-activation for distillation; it never changes
    the computed values.
    """
    if a_hat.n_rows != a_hat.n_cols:
        raise ShapeError("propagation matrix must be square")
    if x.rows != a_hat.n_rows:
        raise ShapeError(f"features have {x.rows} rows but graph has {a_hat.n_rows} nodes")
    if x.cols != model.layers[0].d_in:
        raise ShapeError(f"feature width {x.cols} != first layer input {model.layers[0].d_in}")

    h = x
    pre_acts: list[Tensor] = []
    last = model.n_layers - 1
    for i, layer in enumerate(model.layers):
        w = tape.watch(layer.weight) if tape is not None else layer.weight.detach()
        z = ad.spmm_ad(a_hat, ad.matmul(h, w))
        if capture:
            pre_acts.append(z)
        h = ad.relu(z) if i != last else z
    return ForwardRecord(logits=h, pre_activations=pre_acts)


def supervised_loss(record: ForwardRecord, labels, mask) -> Tensor:
    """Mean cross-entropy over the masked nodes."""
    return ad.cross_entropy_with_logits(record.logits, labels, mask)


def accuracy(record: ForwardRecord, labels, mask) -> float:
    """Fraction of masked nodes whose argmax logit matches the label.

    Ties break toward the lowest class index.
    """
    labels = np.asarray(labels)
    if mask is None:
        idx = np.arange(record.logits.rows)
    else:
        idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    if idx.size == 0:
        raise ContractError("mask selects no rows")
    preds = record.logits.data[idx].argmax(axis=1)
    return float((preds == labels[idx]).mean())


def save_model(model: GcnModel, directory) -> Path:
    """Checkpoint: ordered tensor binary plus a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ad.save_tensors(directory / "weights.bin", model.weights())
    manifest = {
        "dims": model.dims,
        "n_layers": model.n_layers,
        "hidden_dim": model.hidden_dim,
        "seed": model.seed,
    }
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return directory


def load_model(directory) -> GcnModel:
    directory = Path(directory)
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    tensors = ad.load_tensors(directory / "weights.bin")
    if len(tensors) != manifest["n_layers"]:
        raise ContractError(
            f"manifest lists {manifest['n_layers']} layers, file holds {len(tensors)}"
        )
    model = GcnModel([GcnLayer(t) for t in tensors], manifest["hidden_dim"], manifest["seed"])
    if model.dims != manifest["dims"]:
        raise ContractError("manifest dims disagree with stored tensors")
    return model
