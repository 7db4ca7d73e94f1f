"""Attention-based distillation: layer-pair attention, dissimilarity, losses.

The head learns which teacher/student layer pairs matter (attention path)
and how far apart their projected embeddings are (dissimilarity path); the
distillation loss is the attention-weighted mean of the dissimilarities.
SoftKD and a last-layer MSE baseline live here too, as does a numerical
check that student weight gradients pick up deeper teacher layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import ContractError, ParameterError, ShapeError
from .gcn import ForwardRecord, GcnModel, forward, supervised_loss
from .seeding import glorot_uniform, make_rng
from .sparse import CsrMatrix

DISTANCES = ("euclidean", "cosine")


@dataclass
class AttentionMap:
    """Row-stochastic teacher-layers x student-layers importance scores."""

    a: Tensor

    def validate(self, tol: float = 1e-9):
        sums = self.a.data.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > tol):
            raise ContractError(f"attention rows must sum to 1 within {tol}")
        if np.any(self.a.data <= 0) or np.any(self.a.data >= 1):
            # a single-column map is all ones; that is the only exception
            if self.a.cols > 1 or np.any(self.a.data != 1.0):
                raise ContractError("attention entries must lie in (0, 1)")


@dataclass
class DissimilarityMap:
    """Teacher-layers x student-layers distances between projected embeddings."""

    d: Tensor


class AbkdHead:
    """Trainable projections for the attention and dissimilarity paths.

    Per-layer attention projections map each layer's node-mean embedding
    into the shared d_a space; the dissimilarity projections map full
    per-node embeddings. Layers of equal width share one dissimilarity
    matrix per side (teacher/student); with shared_att_proj the attention
    projections are shared the same way. An optional d_a x d_a subspace
    matrix is applied before distances are taken.
    """

    def __init__(self, att_proj_teacher, att_proj_student, diss_proj_teacher,
                 diss_proj_student, subspace, d_a, distance="euclidean",
                 use_subspace=True, shared_att_proj=False, node_mean=True):
        if d_a <= 0:
            raise ParameterError("d_a must be positive")
        if distance not in DISTANCES:
            raise ParameterError(f"distance must be one of {DISTANCES}")
        self.att_proj_teacher = list(att_proj_teacher)
        self.att_proj_student = list(att_proj_student)
        self.diss_proj_teacher = list(diss_proj_teacher)
        self.diss_proj_student = list(diss_proj_student)
        self.subspace = subspace
        self.d_a = int(d_a)
        self.distance = distance
        self.use_subspace = bool(use_subspace)
        self.shared_att_proj = bool(shared_att_proj)
        self.node_mean = bool(node_mean)

    @classmethod
    def create(cls, teacher_out_dims, student_out_dims, d_a, seed,
               distance="euclidean", use_subspace=True, shared_att_proj=False,
               node_mean=True) -> "AbkdHead":
        """Glorot-initialized head sized for the given per-layer widths."""
        if d_a <= 0:
            raise ParameterError("d_a must be positive")
        if not teacher_out_dims or not student_out_dims:
            raise ParameterError("both networks need at least one layer")
        rng = make_rng(seed)

        def per_layer(dims, shared):
            projs, by_width = [], {}
            for w in dims:
                if shared and w in by_width:
                    projs.append(by_width[w])
                    continue
                t = Tensor(glorot_uniform(rng, w, d_a))
                by_width[w] = t
                projs.append(t)
            return projs

        att_t = per_layer(teacher_out_dims, shared_att_proj)
        att_s = per_layer(student_out_dims, shared_att_proj)
        # dissimilarity projections are always shared across equal-width layers
        diss_t = per_layer(teacher_out_dims, True)
        diss_s = per_layer(student_out_dims, True)
        subspace = Tensor(glorot_uniform(rng, d_a, d_a))
        return cls(att_t, att_s, diss_t, diss_s, subspace, d_a, distance,
                   use_subspace, shared_att_proj, node_mean)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        """Unique trainable tensors with stable names (aliases listed once)."""
        out, seen = [], set()

        def push(name, t):
            if id(t) not in seen:
                seen.add(id(t))
                out.append((name, t))

        for i, t in enumerate(self.att_proj_teacher):
            push(f"att_proj_teacher[{i}]", t)
        for j, t in enumerate(self.att_proj_student):
            push(f"att_proj_student[{j}]", t)
        for i, t in enumerate(self.diss_proj_teacher):
            push(f"diss_proj_teacher[{i}]", t)
        for j, t in enumerate(self.diss_proj_student):
            push(f"diss_proj_student[{j}]", t)
        if self.use_subspace:
            push("subspace", self.subspace)
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def tie_student_to_teacher(self):
        """Alias the student projections to the teacher's (same-shape towers)."""
        t_dims = [t.rows for t in self.att_proj_teacher]
        s_dims = [t.rows for t in self.att_proj_student]
        if t_dims != s_dims:
            raise ShapeError("tying requires identical per-layer widths")
        self.att_proj_student = list(self.att_proj_teacher)
        self.diss_proj_student = list(self.diss_proj_teacher)


def _use(t: Tensor, tape: Tape | None) -> Tensor:
    return tape.watch(t) if tape is not None else t.detach()


def _check_layer_inputs(teacher_pre, student_pre):
    if not teacher_pre or not student_pre:
        raise ContractError("both pre-activation lists must be non-empty")
    n = teacher_pre[0].rows
    for t in list(teacher_pre) + list(student_pre):
        if t.rows != n:
            raise ShapeError("all layers must share the node count")
    return n


def attention_map(teacher_pre, student_pre, head: AbkdHead, tape: Tape | None = None) -> AttentionMap:
    """Softmax importance scores over teacher-student layer pairs.

    Each layer's node-mean embedding is projected into the shared space;
    the score matrix is the scaled dot product of the projected teacher
    and student rows, softmaxed over student layers.
    """
    _check_layer_inputs(teacher_pre, student_pre)
    if len(teacher_pre) != len(head.att_proj_teacher) or len(student_pre) != len(head.att_proj_student):
        raise ShapeError("head projection count does not match layer count")

    def project(pre_list, projs):
        rows = []
        for t, p in zip(pre_list, projs):
            if t.cols != p.rows:
                raise ShapeError(f"layer width {t.cols} != projection input {p.rows}")
            rows.append(ad.matmul(ad.mean_rows(t), _use(p, tape)))
        return ad.concat_rows(rows)

    t_p = project(teacher_pre, head.att_proj_teacher)
    s_p = project(student_pre, head.att_proj_student)
    logits = ad.scale(ad.matmul(t_p, ad.transpose(s_p)), 1.0 / math.sqrt(head.d_a))
    return AttentionMap(ad.row_softmax(logits))


def dissimilarity_map(teacher_pre, student_pre, head: AbkdHead, tape: Tape | None = None) -> DissimilarityMap:
    """Pairwise distances between projected per-node embeddings.

    Euclidean mode: project both sides into the shared space (optionally
    through the subspace matrix), take each node's mean over the embedding
    dimension, and use the node-mean of the squared differences (the
    node-mean keeps the scale graph-size independent; disable via
    head.node_mean for the raw squared norm). Cosine mode: one minus the
    cosine of the node-mean projected embeddings.
    """
    n = _check_layer_inputs(teacher_pre, student_pre)
    if len(teacher_pre) != len(head.diss_proj_teacher) or len(student_pre) != len(head.diss_proj_student):
        raise ShapeError("head projection count does not match layer count")

    sub = _use(head.subspace, tape) if head.use_subspace else None

    def project(pre_list, projs):
        out = []
        for t, p in zip(pre_list, projs):
            if t.cols != p.rows:
                raise ShapeError(f"layer width {t.cols} != projection input {p.rows}")
            u = ad.matmul(t, _use(p, tape))
            if sub is not None:
                u = ad.matmul(u, sub)
            out.append(u)
        return out

    teacher_proj = project(teacher_pre, head.diss_proj_teacher)
    student_proj = project(student_pre, head.diss_proj_student)

    rows = []
    for u in teacher_proj:
        entries = []
        for v in student_proj:
            if head.distance == "euclidean":
                delta = ad.mean_cols(ad.sub(u, v))
                d_ij = ad.squared_l2_of_rows_mean(delta)
                if not head.node_mean:
                    d_ij = ad.scale(d_ij, float(n))
            else:
                d_ij = ad.cosine_rowmean_distance(u, v)
            entries.append(d_ij)
        rows.append(ad.concat_cols(entries))
    return DissimilarityMap(ad.concat_rows(rows))


def abkd_loss(a: AttentionMap, d: DissimilarityMap) -> Tensor:
    """Sum over teacher rows, mean over student columns, of A * D."""
    if a.a.shape != d.d.shape:
        raise ShapeError(f"map shapes differ: {a.a.shape} vs {d.d.shape}")
    s_l = a.a.cols
    return ad.scale(ad.sum_all(ad.elementwise_mul(a.a, d.d)), 1.0 / s_l)


def total_loss(student_record: ForwardRecord, labels, mask, a: AttentionMap,
               d: DissimilarityMap, beta: float) -> Tensor:
    """Supervised cross-entropy plus beta times the distillation loss.

    beta == 0 returns the supervised loss tensor itself, so vanilla
    training is recovered exactly.
    """
    if beta < 0:
        raise ParameterError("beta must be non-negative")
    ce = supervised_loss(student_record, labels, mask)
    if beta == 0:
        return ce
    return ad.add(ce, ad.scale(abkd_loss(a, d), float(beta)))


def softkd_loss(student_record: ForwardRecord, teacher_record: ForwardRecord,
                labels, mask, alpha: float) -> Tensor:
    """Cross-entropy plus alpha times the soft-target divergence.

    The soft term is KL(teacher || student) at temperature 1, which equals
    the soft cross-entropy up to the constant teacher entropy and therefore
    has the same gradients with a minimum of zero.
    """
    if alpha < 0:
        raise ParameterError("alpha must be non-negative")
    ce = supervised_loss(student_record, labels, mask)
    if alpha == 0:
        return ce
    t_logits = teacher_record.logits.data
    t_stable = t_logits - t_logits.max(axis=1, keepdims=True)
    t_exp = np.exp(t_stable)
    t_probs = t_exp / t_exp.sum(axis=1, keepdims=True)
    soft = ad.soft_target_kl(student_record.logits, t_probs, mask)
    return ad.add(ce, ad.scale(soft, float(alpha)))


def modified_abkd_mask(t_l: int, s_l: int) -> AttentionMap:
    """Constant map selecting only the final teacher/student layer pair."""
    if t_l < 1 or s_l < 1:
        raise ParameterError("layer counts must be >= 1")
    m = np.zeros((t_l, s_l))
    m[t_l - 1, s_l - 1] = 1.0
    return AttentionMap(Tensor(m))


def fitnet_last_layer_mse(student_record: ForwardRecord, teacher_record: ForwardRecord,
                          proj: Tensor) -> Tensor:
    """Mean squared error between projected student and teacher last-layer embeddings.

    The last layer's pre-activation (the logits, for these models) is the
    embedding; proj maps the student width onto the teacher width.
    """
    if not student_record.pre_activations or not teacher_record.pre_activations:
        raise ContractError("records must be captured (capture=True)")
    s_last = student_record.pre_activations[-1]
    t_last = teacher_record.pre_activations[-1].detach()
    if s_last.cols != proj.rows:
        raise ShapeError(f"projection input {proj.rows} != student width {s_last.cols}")
    if proj.cols != t_last.cols:
        raise ShapeError(f"projection output {proj.cols} != teacher width {t_last.cols}")
    if s_last.rows != t_last.rows:
        raise ShapeError("student and teacher must share the node count")
    diff = ad.sub(ad.matmul(s_last, proj), t_last)
    return ad.scale(ad.squared_l2_of_rows_mean(diff), 1.0 / diff.cols)


@dataclass
class CouplingReport:
    """Result of perturbing one teacher layer and re-reading a student gradient."""

    teacher_layer: int
    student_layer: int
    coupling_norm: float
    baseline_grad_norm: float
    threshold: float = 1e-10

    @property
    def coupled(self) -> bool:
        return self.coupling_norm > self.threshold


def verify_theorem1(teacher: GcnModel, student: GcnModel, head: AbkdHead,
                    a_hat: CsrMatrix, x: Tensor, i: int, j: int, *,
                    labels=None, mask=None, beta: float = 1.0,
                    attention_override: AttentionMap | None = None,
                    delta_scale: float = 1e-2, seed: int = 0) -> CouplingReport:
    """Check that a student layer's gradient depends on a deeper teacher layer.

    Computes the gradient of the training loss with respect to student layer
    j's weight, perturbs teacher layer i's weight by a random delta,
    recomputes, and reports the Frobenius norm of the difference. Requires
    j < i (a shallower student layer paired with a deeper teacher layer).
    With beta == 0 the loss has no distillation path and the coupling is
    exactly zero.
    """
    if not (0 <= i < teacher.n_layers):
        raise ParameterError(f"teacher layer {i} out of range")
    if not (0 <= j < student.n_layers):
        raise ParameterError(f"student layer {j} out of range")
    if not j < i:
        raise ParameterError("requires a student layer strictly shallower than the teacher layer")
    if beta == 0 and labels is None:
        raise ParameterError("beta == 0 needs labels for a supervised loss")

    def student_grad() -> np.ndarray:
        tape = Tape()
        t_rec = forward(teacher, a_hat, x, capture=True)
        s_rec = forward(student, a_hat, x, capture=True, tape=tape)
        terms = []
        if labels is not None:
            terms.append(supervised_loss(s_rec, labels, mask))
        if beta != 0:
            a = attention_override or attention_map(t_rec.pre_activations, s_rec.pre_activations, head, tape)
            d = dissimilarity_map(t_rec.pre_activations, s_rec.pre_activations, head, tape)
            terms.append(ad.scale(abkd_loss(a, d), float(beta)))
        loss = terms[0]
        for extra in terms[1:]:
            loss = ad.add(loss, extra)
        grads = ad.backward(tape, loss)
        return grads[student.layers[j].weight].copy()

    g1 = student_grad()
    w_i = teacher.layers[i].weight
    original = w_i.data.copy()
    rng = make_rng(seed)
    w_i.data += delta_scale * rng.standard_normal(w_i.data.shape)
    try:
        g2 = student_grad()
    finally:
        w_i.data[:] = original
    return CouplingReport(
        teacher_layer=i,
        student_layer=j,
        coupling_norm=float(np.linalg.norm(g1 - g2)),
        baseline_grad_norm=float(np.linalg.norm(g1)),
    )
