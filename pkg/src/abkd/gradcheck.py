"""Finite-difference verification of the full distillation loss gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .data import GraphDataset
from .distill import AbkdHead, attention_map, dissimilarity_map, total_loss
from .gcn import GcnModel, forward
from .seeding import make_rng
from .sparse import CsrMatrix, normalize_adjacency


@dataclass
class Scenario:
    """A small random distillation problem suitable for finite differences."""

    a_hat: CsrMatrix
    x: Tensor
    labels: np.ndarray
    mask: np.ndarray
    teacher: GcnModel
    student: GcnModel
    head: AbkdHead
    beta: float


def random_scenario(seed: int, max_nodes: int = 16, max_teacher_layers: int = 4,
                    max_student_layers: int = 3, max_width: int = 8) -> Scenario:
    """Draw a random scenario, resampling until every student hidden
    pre-activation sits clear of the ReLU kink (finite differences are
    meaningless across it)."""
    for attempt in range(100):
        rng = make_rng(np.random.SeedSequence([seed, attempt]))
        n = int(rng.integers(6, max_nodes + 1))
        n_classes = int(rng.integers(2, 5))
        f = int(rng.integers(3, max_width + 1))
        t_l = int(rng.integers(1, max_teacher_layers + 1))
        s_l = int(rng.integers(1, max_student_layers + 1))
        t_h = int(rng.integers(2, max_width + 1))
        s_h = int(rng.integers(2, max_width + 1))
        d_a = int(rng.integers(3, max_width + 1))

        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(iu.size) < 0.35
        adj = CsrMatrix.from_coo(
            n, n,
            np.concatenate([iu[keep], ju[keep]]),
            np.concatenate([ju[keep], iu[keep]]),
            sum_duplicates=False,
        )
        a_hat = normalize_adjacency(adj, add_self_loops=True)
        x = Tensor(rng.uniform(-1.0, 1.0, size=(n, f)))
        labels = rng.integers(0, n_classes, size=n)
        mask = rng.random(n) < 0.7
        if not mask.any():
            mask[0] = True

        teacher = GcnModel.create([f] + [t_h] * (t_l - 1) + [n_classes],
                                  seed=int(rng.integers(0, 2**31)))
        student = GcnModel.create([f] + [s_h] * (s_l - 1) + [n_classes],
                                  seed=int(rng.integers(0, 2**31)))
        head = AbkdHead.create(teacher.layer_out_dims, student.layer_out_dims,
                               d_a=d_a, seed=int(rng.integers(0, 2**31)))
        beta = float(rng.uniform(0.5, 2.0))

        rec = forward(student, a_hat, x, capture=True)
        margins = [np.abs(z.data).min() for z in rec.pre_activations[:-1]]
        if margins and min(margins) < 1e-3:
            continue
        return Scenario(a_hat, x, labels, mask, teacher, student, head, beta)
    raise RuntimeError(f"could not draw a kink-free scenario for seed {seed}")


def _loss_value(sc: Scenario) -> float:
    t_rec = forward(sc.teacher, sc.a_hat, sc.x, capture=True)
    s_rec = forward(sc.student, sc.a_hat, sc.x, capture=True)
    a = attention_map(t_rec.pre_activations, s_rec.pre_activations, sc.head)
    d = dissimilarity_map(t_rec.pre_activations, s_rec.pre_activations, sc.head)
    return total_loss(s_rec, sc.labels, sc.mask, a, d, sc.beta).item()


def analytic_gradients(sc: Scenario):
    """Gradient of the total loss for every trainable tensor (student + head)."""
    tape = Tape()
    t_rec = forward(sc.teacher, sc.a_hat, sc.x, capture=True)
    s_rec = forward(sc.student, sc.a_hat, sc.x, capture=True, tape=tape)
    a = attention_map(t_rec.pre_activations, s_rec.pre_activations, sc.head, tape)
    d = dissimilarity_map(t_rec.pre_activations, s_rec.pre_activations, sc.head, tape)
    loss = total_loss(s_rec, sc.labels, sc.mask, a, d, sc.beta)
    grads = ad.backward(tape, loss)
    named = [(f"student.layer{i}.weight", w) for i, w in enumerate(sc.student.weights())]
    named += sc.head.named_parameters()
    return [(name, p, grads[p].copy()) for name, p in named]


def check_scenario(sc: Scenario, eps: float = 1e-6, rtol: float = 1e-4,
                   atol: float = 1e-7):
    """Compare analytic gradients to central finite differences.

    Returns (max_rel_err, worst_name); entries whose absolute deviation is
    below atol are treated as matching regardless of relative error.
    """
    max_rel, worst = 0.0, ""
    for name, param, analytic in analytic_gradients(sc):
        def f(candidate: Tensor, _p=param) -> float:
            saved = _p.data
            _p.data = candidate.data
            try:
                return _loss_value(sc)
            finally:
                _p.data = saved

        fd = ad.finite_diff_grad(f, param, eps=eps).data
        absdiff = np.abs(analytic - fd)
        denom = np.maximum(np.abs(analytic), np.abs(fd))
        significant = absdiff > atol
        if significant.any():
            rel = np.where(significant, absdiff / np.maximum(denom, 1e-300), 0.0)
            k = float(rel.max())
            if k > max_rel:
                max_rel, worst = k, name
    return max_rel, worst


def run_gradcheck(trials: int = 20, seed: int = 0, rtol: float = 1e-4,
                  atol: float = 1e-7, verbose: bool = False):
    """Gradient fidelity sweep over seeded random scenarios."""
    worst_overall, failures = 0.0, []
    for k in range(trials):
        sc = random_scenario(seed + k)
        max_rel, worst = check_scenario(sc, rtol=rtol, atol=atol)
        worst_overall = max(worst_overall, max_rel)
        ok = max_rel < rtol
        if not ok:
            failures.append((seed + k, worst, max_rel))
        if verbose:
            print(f"trial {k}: max rel err {max_rel:.3e} ({worst or 'all below atol'}) "
                  f"{'ok' if ok else 'FAIL'}")
    return worst_overall, failures
