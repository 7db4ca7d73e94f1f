"""Optimizers and the teacher / distillation training loops."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .data import GraphDataset
from .distill import (
    AbkdHead,
    abkd_loss,
    attention_map,
    dissimilarity_map,
    fitnet_last_layer_mse,
    modified_abkd_mask,
    softkd_loss,
    total_loss,
)
from .errors import ConfigError, NumericError, ParameterError, TrainingDivergedError
from .gcn import GcnModel, accuracy, forward, supervised_loss
from .seeding import glorot_uniform, make_rng
from .sparse import normalize_adjacency

DISTILLERS = ("none", "abkd", "abkd_modified", "softkd", "fitnet")


class Adam:
    """Bias-corrected Adam over a fixed parameter list; updates in place."""

    def __init__(self, params, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8, names=None):
        self.params = list(params)
        self.names = list(names) if names is not None else [f"param{i}" for i in range(len(self.params))]
        if len(self.names) != len(self.params):
            raise ParameterError("one name per parameter required")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, grads):
        """One update from a Gradients lookup (or an aligned list of arrays)."""
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for k, p in enumerate(self.params):
            g = grads[p] if not isinstance(grads, (list, tuple)) else grads[k]
            if not np.isfinite(g).all():
                raise NumericError(f"non-finite gradient for {self.names[k]}")
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bias1
            v_hat = self.v[k] / bias2
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(state: Adam, params, grads):
    """Functional form of one Adam update over state.params."""
    if list(params) != state.params:
        raise ParameterError("params must be the list the state was built for")
    state.step(grads)
    return params


@dataclass
class TrainReport:
    """Per-epoch trace of one training run.

    wall_clock_sec is a measurement, not a computation, and is excluded
    from the bit-for-bit reproducibility contract.
    """

    distiller: str | None
    seed: int | None
    epochs: int
    ce_per_epoch: list[float]
    distill_loss_per_epoch: list[float] | None
    val_acc_per_epoch: list[float]
    best_epoch: int
    best_val_acc: float
    test_acc: float
    attention_snapshots: dict[int, list] = field(default_factory=dict)
    dissimilarity_snapshots: dict[int, list] = field(default_factory=dict)
    subspace_frob_per_epoch: list[float] | None = None
    subspace_singular_values: dict[int, list] = field(default_factory=dict)
    wall_clock_sec: float = 0.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["attention_snapshots"] = {str(k): v for k, v in self.attention_snapshots.items()}
        d["dissimilarity_snapshots"] = {str(k): v for k, v in self.dissimilarity_snapshots.items()}
        d["subspace_singular_values"] = {str(k): v for k, v in self.subspace_singular_values.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        d = dict(d)
        d["attention_snapshots"] = {int(k): v for k, v in d.get("attention_snapshots", {}).items()}
        d["dissimilarity_snapshots"] = {int(k): v for k, v in d.get("dissimilarity_snapshots", {}).items()}
        d["subspace_singular_values"] = {int(k): v for k, v in d.get("subspace_singular_values", {}).items()}
        return cls(**d)

    def save_json(self, path):
        with open(Path(path), "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "TrainReport":
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh))

    def equals_ignoring_wall_clock(self, other: "TrainReport") -> bool:
        a, b = self.to_dict(), other.to_dict()
        a.pop("wall_clock_sec")
        b.pop("wall_clock_sec")
        return a == b


@dataclass
class DistillConfig:
    """Settings consumed by distill_student."""

    distiller: str = "abkd"
    epochs: int = 300
    lr: float = 1e-2
    beta: float = 10.0
    alpha: float = 1.0
    snapshot_every: int = 50
    seed: int = 0
    add_self_loops: bool = True
    subspace_weight_decay: float = 0.0


def _graph_inputs(dataset: GraphDataset, add_self_loops: bool):
    a_hat = normalize_adjacency(dataset.adjacency, add_self_loops=add_self_loops)
    return a_hat, Tensor(dataset.features)


def _check_loss_finite(loss, epoch, what):
    v = loss.item()
    if not np.isfinite(v):
        raise TrainingDivergedError(f"{what} loss became {v} at epoch {epoch}")
    return v


def train_teacher(model: GcnModel, dataset: GraphDataset, epochs: int, lr: float,
                  seed: int, add_self_loops: bool = True) -> tuple[GcnModel, TrainReport]:
    """Supervised full-graph training; returns the best-validation checkpoint.

    The input model only supplies the architecture: weights are freshly
    Glorot-initialized from seed, so the whole run is a deterministic
    function of (architecture, dataset, epochs, lr, seed).
    """
    if epochs < 1:
        raise ParameterError("epochs must be >= 1")
    t0 = time.perf_counter()
    net = GcnModel.create(model.dims, seed=seed)
    a_hat, x = _graph_inputs(dataset, add_self_loops)
    labels = dataset.labels
    opt = Adam(net.weights(), lr=lr, names=[f"layer{i}.weight" for i in range(net.n_layers)])

    ce_hist, val_hist = [], []
    best_val, best_epoch = -1.0, -1
    best_weights = None
    for epoch in range(epochs):
        tape = Tape()
        rec = forward(net, a_hat, x, capture=False, tape=tape)
        loss = supervised_loss(rec, labels, dataset.train_mask)
        ce_hist.append(_check_loss_finite(loss, epoch, "training"))
        grads = ad.backward(tape, loss)
        opt.step(grads)

        eval_rec = forward(net, a_hat, x)
        val_acc = accuracy(eval_rec, labels, dataset.val_mask)
        val_hist.append(val_acc)
        # ties go to the later epoch: at equal validation accuracy the longer
        # trained weights carry the more settled features
        if val_acc >= best_val:
            best_val, best_epoch = val_acc, epoch
            best_weights = [w.data.copy() for w in net.weights()]

    best = GcnModel.create(model.dims, seed=seed)
    for w, data in zip(best.weights(), best_weights):
        w.data[:] = data
    test_acc = accuracy(forward(best, a_hat, x), labels, dataset.test_mask)
    report = TrainReport(
        distiller=None,
        seed=seed,
        epochs=epochs,
        ce_per_epoch=ce_hist,
        distill_loss_per_epoch=None,
        val_acc_per_epoch=val_hist,
        best_epoch=best_epoch,
        best_val_acc=best_val,
        test_acc=test_acc,
        wall_clock_sec=time.perf_counter() - t0,
    )
    return best, report


def distill_student(teacher: GcnModel, student: GcnModel, head: AbkdHead | None,
                    dataset: GraphDataset, config: DistillConfig) -> tuple[GcnModel, TrainReport]:
    """Train the student under a frozen teacher with the configured distiller.

    The teacher forward pass is computed once and cached: its weights are
    frozen, so its pre-activations are constant across epochs (head
    projections still recompute their products on the tape each step).
    The student is trained as given; snapshot maps are recorded every
    snapshot_every epochs plus a final post-training snapshot keyed by
    the epoch count.
    """
    if config.distiller not in DISTILLERS:
        raise ConfigError(f"unknown distiller {config.distiller!r}")
    if config.epochs < 1:
        raise ParameterError("epochs must be >= 1")
    needs_head = config.distiller in ("abkd", "abkd_modified")
    if needs_head and head is None:
        raise ConfigError(f"distiller {config.distiller!r} requires a head")
    t0 = time.perf_counter()

    a_hat, x = _graph_inputs(dataset, config.add_self_loops)
    labels = dataset.labels
    teacher_rec = forward(teacher, a_hat, x, capture=True)

    params = list(student.weights())
    names = [f"layer{i}.weight" for i in range(student.n_layers)]
    fitnet_proj = None
    if needs_head:
        for name, p in head.named_parameters():
            params.append(p)
            names.append(name)
    elif config.distiller == "fitnet":
        s_w = student.layers[-1].d_out
        t_w = teacher.layers[-1].d_out
        fitnet_proj = Tensor(glorot_uniform(make_rng(config.seed), s_w, t_w))
        params.append(fitnet_proj)
        names.append("fitnet_proj")
    opt = Adam(params, lr=config.lr, names=names)

    mask_map = None
    if config.distiller == "abkd_modified":
        mask_map = modified_abkd_mask(teacher.n_layers, student.n_layers)

    ce_hist, dl_hist, val_hist = [], [], []
    frob_hist = [] if needs_head and head.use_subspace else None
    att_snaps, diss_snaps, sv_snaps = {}, {}, {}
    best_val, best_epoch = -1.0, -1
    best_weights = None

    def snapshot(epoch, a, d):
        att_snaps[epoch] = a.a.data.tolist()
        diss_snaps[epoch] = d.d.data.tolist()
        if needs_head and head.use_subspace:
            sv_snaps[epoch] = np.linalg.svd(head.subspace.data, compute_uv=False).tolist()

    for epoch in range(config.epochs):
        tape = Tape()
        for p in params:  # parameters untouched by the configured loss get zero grads
            tape.watch(p)
        rec = forward(student, a_hat, x, capture=True, tape=tape)
        ce = supervised_loss(rec, labels, dataset.train_mask)

        distill_term = None
        if config.distiller == "none":
            loss = ce
        elif config.distiller in ("abkd", "abkd_modified"):
            t_pre = teacher_rec.pre_activations
            s_pre = rec.pre_activations
            if config.distiller == "abkd":
                a = attention_map(t_pre, s_pre, head, tape)
            else:
                a = mask_map
            d = dissimilarity_map(t_pre, s_pre, head, tape)
            distill_term = abkd_loss(a, d)
            loss = total_loss(rec, labels, dataset.train_mask, a, d, config.beta)
            if epoch % config.snapshot_every == 0:
                snapshot(epoch, a, d)
        elif config.distiller == "softkd":
            loss = softkd_loss(rec, teacher_rec, labels, dataset.train_mask, config.alpha)
            soft_value = loss.item() - ce.item()
        else:  # fitnet; alpha weighs the imitation term, as for softkd
            distill_term = fitnet_last_layer_mse(rec, teacher_rec, tape.watch(fitnet_proj))
            loss = ad.add(ce, ad.scale(distill_term, float(config.alpha)))

        ce_hist.append(_check_loss_finite(ce, epoch, "supervised"))
        if config.distiller == "softkd":
            dl_hist.append(soft_value)
        else:
            dl_hist.append(distill_term.item() if distill_term is not None else 0.0)
        if frob_hist is not None:
            frob_hist.append(float(np.linalg.norm(head.subspace.data)))
        grads = ad.backward(tape, loss)
        if needs_head and config.subspace_weight_decay > 0 and head.use_subspace:
            grads[head.subspace] += config.subspace_weight_decay * head.subspace.data
        opt.step(grads)

        eval_rec = forward(student, a_hat, x)
        val_acc = accuracy(eval_rec, labels, dataset.val_mask)
        val_hist.append(val_acc)
        if val_acc >= best_val:  # ties to the later epoch, as in train_teacher
            best_val, best_epoch = val_acc, epoch
            best_weights = [w.data.copy() for w in student.weights()]

    if needs_head:
        final_rec = forward(student, a_hat, x, capture=True)
        a = attention_map(teacher_rec.pre_activations, final_rec.pre_activations, head) \
            if config.distiller == "abkd" else mask_map
        d = dissimilarity_map(teacher_rec.pre_activations, final_rec.pre_activations, head)
        snapshot(config.epochs, a, d)

    best = student.copy()
    for w, data in zip(best.weights(), best_weights):
        w.data[:] = data
    test_acc = accuracy(forward(best, a_hat, x), labels, dataset.test_mask)
    report = TrainReport(
        distiller=config.distiller,
        seed=config.seed,
        epochs=config.epochs,
        ce_per_epoch=ce_hist,
        distill_loss_per_epoch=dl_hist,
        val_acc_per_epoch=val_hist,
        best_epoch=best_epoch,
        best_val_acc=best_val,
        test_acc=test_acc,
        attention_snapshots=att_snaps,
        dissimilarity_snapshots=diss_snaps,
        subspace_frob_per_epoch=frob_hist,
        subspace_singular_values=sv_snaps,
        wall_clock_sec=time.perf_counter() - t0,
    )
    return best, report
