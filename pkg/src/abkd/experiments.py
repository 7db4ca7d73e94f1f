"""Experiment drivers behind the CLI verbs: runs, sweeps, weight-init, exports."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .config import SWEEPABLE, ExperimentConfig
from .data import GraphDataset, generate_sbm, load_citation_dataset
from .distill import AbkdHead
from .errors import ConfigError
from .export import write_map_csv, write_map_pgm
from .gcn import GcnModel, load_model, save_model
from .seeding import derive_seed, glorot_uniform, make_rng
from .sparse import normalize_adjacency
from .train import Adam, DistillConfig, TrainReport, distill_student, train_teacher


def load_dataset(config: ExperimentConfig) -> GraphDataset:
    spec = dict(config.dataset)
    kind = spec.pop("kind")
    if kind == "sbm":
        return generate_sbm(
            n_per_block=spec["n_per_block"],
            n_blocks=spec["n_blocks"],
            p_in=spec["p_in"],
            p_out=spec["p_out"],
            n_features=spec["n_features"],
            signal=spec["signal"],
            seed=spec["seed"],
        )
    return load_citation_dataset(
        spec["content_path"],
        spec["cites_path"],
        normalize_features=spec.get("normalize_features", True),
        split_seed=spec.get("split_seed", 0),
        split_path=spec.get("split_path"),
    )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _summary_row(distiller: str, accs: list[float]) -> dict:
    accs = np.asarray(accs, dtype=np.float64)
    mean = float(accs.mean())
    std = float(accs.std(ddof=1)) if accs.size > 1 else 0.0
    return {
        "distiller": distiller,
        "n_seeds": accs.size,
        "mean": mean,
        "std": std,
        "formatted": f"{100 * mean:.2f} ± {100 * std:.2f}",
        "per_seed": ";".join(_fmt(a) for a in accs),
    }


def _write_summary_csv(path: Path, rows: list[dict]):
    with open(path, "w") as fh:
        fh.write("distiller,n_seeds,mean_test_accuracy,std_test_accuracy,summary,per_seed_test_accuracy\n")
        for r in rows:
            fh.write(
                f"{r['distiller']},{r['n_seeds']},{_fmt(r['mean'])},{_fmt(r['std'])},"
                f"{r['formatted']},{r['per_seed']}\n"
            )


def _export_snapshots(report: TrainReport, directory: Path):
    for epoch, snap in sorted(report.attention_snapshots.items()):
        m = np.array(snap)
        write_map_csv(directory / f"attention_{epoch}.csv", m)
        write_map_pgm(directory / f"attention_{epoch}.pgm", m)
    for epoch, snap in sorted(report.dissimilarity_snapshots.items()):
        m = np.array(snap)
        write_map_csv(directory / f"dissimilarity_{epoch}.csv", m)
        write_map_pgm(directory / f"dissimilarity_{epoch}.pgm", m)


def _teacher_for_seed(config: ExperimentConfig, dataset: GraphDataset, seed: int,
                      seed_dir: Path) -> GcnModel:
    """Pretrain the teacher, or load a previously trained one."""
    teacher_dir = seed_dir / "teacher"
    dims = [dataset.n_features] + [config.teacher_hidden] * (config.teacher_layers - 1) \
        + [dataset.n_classes]
    if (teacher_dir / "manifest.json").exists():
        teacher = load_model(teacher_dir)
        if teacher.dims == dims:
            return teacher
    proto = GcnModel.create(dims, seed=0)
    teacher, report = train_teacher(
        proto, dataset, epochs=config.teacher_epochs, lr=config.lr,
        seed=derive_seed(seed, "teacher"), add_self_loops=config.add_self_loops,
    )
    save_model(teacher, teacher_dir)
    report.save_json(teacher_dir / "report.json")
    return teacher


def run_experiment(config: ExperimentConfig) -> tuple[Path, list[dict]]:
    """Run every (seed, distiller) cell and summarize test accuracies.

    All distillers within one seed consume the byte-identical student
    initialization checkpoint written under seed<k>/student_init.
    """
    config.validate()
    out = config.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    config.save_json(out / "config.json")
    dataset = load_dataset(config)

    accs: dict[str, list[float]] = {d: [] for d in config.distillers}
    for seed in config.seeds:
        seed_dir = out / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        teacher = _teacher_for_seed(config, dataset, seed, seed_dir)

        student_dims = [dataset.n_features] + [config.student_hidden] * (config.student_layers - 1) \
            + [dataset.n_classes]
        init = GcnModel.create(student_dims, seed=derive_seed(seed, "student"))
        save_model(init, seed_dir / "student_init")

        for distiller in config.distillers:
            student = load_model(seed_dir / "student_init")
            head = None
            if distiller in ("abkd", "abkd_modified"):
                head = AbkdHead.create(
                    teacher.layer_out_dims, student.layer_out_dims,
                    d_a=config.d_a, seed=derive_seed(seed, "head"),
                    distance=config.distance, use_subspace=config.use_subspace,
                    shared_att_proj=config.shared_att_proj, node_mean=config.node_mean,
                )
            dcfg = DistillConfig(
                distiller=distiller,
                epochs=config.epochs,
                lr=config.lr,
                beta=config.beta,
                alpha=config.alpha,
                snapshot_every=config.snapshot_every,
                seed=derive_seed(seed, "fitnet") if distiller == "fitnet" else seed,
                add_self_loops=config.add_self_loops,
                subspace_weight_decay=config.subspace_weight_decay,
            )
            best, report = distill_student(teacher, student, head, dataset, dcfg)
            report.seed = seed
            cell_dir = seed_dir / distiller
            cell_dir.mkdir(parents=True, exist_ok=True)
            report.save_json(cell_dir / "report.json")
            save_model(best, cell_dir / "checkpoint")
            _export_snapshots(report, cell_dir)
            accs[distiller].append(report.test_acc)

    rows = [_summary_row(d, accs[d]) for d in config.distillers]
    _write_summary_csv(out / "summary.csv", rows)
    return out, rows


def _apply_sweep_value(config: ExperimentConfig, key: str, value):
    if key == "beta":
        return dataclasses.replace(config, beta=float(value))
    if key == "d_a":
        return dataclasses.replace(config, d_a=int(value))
    if key == "distance":
        if value not in ("euclidean", "cosine"):
            raise ConfigError(f"bad distance value {value!r}")
        return dataclasses.replace(config, distance=str(value))
    if key == "subspace":
        return dataclasses.replace(config, use_subspace=_as_bool(value))
    if key == "shared_proj":
        return dataclasses.replace(config, shared_att_proj=_as_bool(value))
    raise ConfigError(f"unknown sweep key {key!r} (choose from {SWEEPABLE})")


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if str(value).lower() in ("true", "on", "1", "yes"):
        return True
    if str(value).lower() in ("false", "off", "0", "no"):
        return False
    raise ConfigError(f"bad boolean value {value!r}")


def ablate(config: ExperimentConfig, sweep_key: str, values: list) -> tuple[Path, list[dict]]:
    """One run per sweep value; each value's run shares per-seed initial weights
    by construction (identical seeds, identical derivations)."""
    if not values:
        raise ConfigError("sweep values list must be non-empty")
    config.validate()
    out = config.resolved_out_dir()
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for value in values:
        sub = _apply_sweep_value(config, sweep_key, value)
        sub = dataclasses.replace(
            sub, distillers=["abkd"], out_dir=str(out / f"{sweep_key}_{value}")
        )
        _, sub_rows = run_experiment(sub)
        row = dict(sub_rows[0])
        row["sweep_key"] = sweep_key
        row["value"] = value
        rows.append(row)

    sweep_path = out / f"sweep_{sweep_key}.csv"
    with open(sweep_path, "w") as fh:
        fh.write("sweep_key,value,n_seeds,mean_test_accuracy,std_test_accuracy,summary\n")
        for r in rows:
            fh.write(
                f"{r['sweep_key']},{r['value']},{r['n_seeds']},{_fmt(r['mean'])},"
                f"{_fmt(r['std'])},{r['formatted']}\n"
            )
    return sweep_path, rows


def select_student_layer(attention: np.ndarray) -> int:
    """Majority vote of the per-teacher-row argmax; ties pick the deeper layer."""
    votes = np.argmax(attention, axis=1)
    counts = np.bincount(votes, minlength=attention.shape[1])
    best = 0
    for j in range(attention.shape[1]):
        if counts[j] >= counts[best]:
            best = j
    return best


class _ComposedOneLayer:
    """One-layer network built around a donor student layer.

    The trainable core is the selected layer's weight; fixed input/output
    projections come from the donor's first/last layers so feature and
    class widths line up regardless of which layer was selected.
    """

    def __init__(self, donor: GcnModel, selected: int, core: Tensor):
        self.w_in = donor.layers[0].weight.data.copy() if selected > 0 else None
        self.w_out = donor.layers[-1].weight.data.copy() if selected < donor.n_layers - 1 else None
        self.core = core

    def logits(self, a_hat, x: Tensor, tape: Tape | None = None):
        h = Tensor(x.data @ self.w_in) if self.w_in is not None else x
        core = tape.watch(self.core) if tape is not None else self.core.detach()
        z = ad.matmul(h, core)
        if self.w_out is not None:
            z = ad.matmul(z, Tensor(self.w_out))
        return ad.spmm_ad(a_hat, z)


def _train_one_layer(net: _ComposedOneLayer, dataset: GraphDataset, a_hat, x,
                     epochs: int, lr: float, decay: float) -> float:
    opt = Adam([net.core], lr=lr, names=["core"])
    # fixed epoch budget, final weights reported. The ridge term matters:
    # the core enters the logits linearly, so with decay > 0 the objective
    # is strictly convex and long-enough training lands on its unique
    # optimum; without it, cross-entropy on separable masks has no
    # minimizer and the endpoint depends on the start
    for _ in range(epochs):
        tape = Tape()
        logits = net.logits(a_hat, x, tape)
        loss = ad.cross_entropy_with_logits(logits, dataset.labels, dataset.train_mask)
        grads = ad.backward(tape, loss)
        if decay > 0:
            grads[net.core] += decay * net.core.data
        opt.step(grads)
    return _one_layer_accuracy(net, dataset, a_hat, x, dataset.test_mask)


def _one_layer_accuracy(net: _ComposedOneLayer, dataset: GraphDataset, a_hat, x, mask) -> float:
    logits = net.logits(a_hat, x)
    idx = np.flatnonzero(mask)
    preds = logits.data[idx].argmax(axis=1)
    return float((preds == dataset.labels[idx]).mean())


def weight_init_experiment(config: ExperimentConfig, run_dir) -> tuple[Path, list[dict]]:
    """Build one-layer networks from the attention-selected student layer.

    For every seed of a finished distillation run, reads the final attention
    snapshot and the distilled student checkpoint, selects the layer most
    knowledge was distilled into, and compares three one-layer variants:
    initialized-then-trained, randomly-initialized-then-trained, and
    initialized-without-training (evaluated on the test mask).
    """
    run_dir = Path(run_dir)
    run_config_path = run_dir / "config.json"
    if not run_config_path.exists():
        raise ConfigError(f"no config.json under {run_dir}")
    run_config = ExperimentConfig.load_json(run_config_path)
    dataset = load_dataset(run_config)
    a_hat = normalize_adjacency(dataset.adjacency, add_self_loops=run_config.add_self_loops)
    x = Tensor(dataset.features)

    results = {"initialized": [], "random": [], "no_training": []}
    selected_layers = []
    for seed in run_config.seeds:
        cell = run_dir / f"seed{seed}" / "abkd"
        report_path = cell / "report.json"
        if not report_path.exists():
            raise ConfigError(f"missing distillation artifacts under {cell}")
        report = TrainReport.load_json(report_path)
        if not report.attention_snapshots:
            raise ConfigError(f"run under {cell} saved no attention snapshots")
        final_epoch = max(report.attention_snapshots)
        attention = np.array(report.attention_snapshots[final_epoch])
        donor = load_model(cell / "checkpoint")
        selected = select_student_layer(attention)
        selected_layers.append(selected)

        donor_core = donor.layers[selected].weight.data
        epochs, lr, decay = config.weight_init_epochs, config.lr, config.weight_init_decay

        net = _ComposedOneLayer(donor, selected, Tensor(donor_core.copy()))
        results["initialized"].append(_train_one_layer(net, dataset, a_hat, x, epochs, lr, decay))

        rng = make_rng(derive_seed(seed, "weight-init-random"))
        rand_core = Tensor(glorot_uniform(rng, donor_core.shape[0], donor_core.shape[1]))
        net = _ComposedOneLayer(donor, selected, rand_core)
        results["random"].append(_train_one_layer(net, dataset, a_hat, x, epochs, lr, decay))

        net = _ComposedOneLayer(donor, selected, Tensor(donor_core.copy()))
        results["no_training"].append(_one_layer_accuracy(net, dataset, a_hat, x, dataset.test_mask))

    rows = []
    for variant in ("initialized", "random", "no_training"):
        row = _summary_row(variant, results[variant])
        row["variant"] = row.pop("distiller")
        rows.append(row)

    out_path = run_dir / "weight_init.csv"
    with open(out_path, "w") as fh:
        fh.write("variant,n_seeds,mean_test_accuracy,std_test_accuracy,summary,per_seed_test_accuracy\n")
        for r in rows:
            fh.write(
                f"{r['variant']},{r['n_seeds']},{_fmt(r['mean'])},{_fmt(r['std'])},"
                f"{r['formatted']},{r['per_seed']}\n"
            )
    with open(run_dir / "weight_init_layers.json", "w") as fh:
        json.dump({str(s): int(l) for s, l in zip(run_config.seeds, selected_layers)}, fh, indent=2)
        fh.write("\n")
    return out_path, rows


def export_maps(cell_dir, epoch: int, dest=None) -> list[Path]:
    """Re-emit the CSV and PGM maps for one snapshot epoch of a finished run."""
    cell_dir = Path(cell_dir)
    report_path = cell_dir / "report.json"
    if not report_path.exists():
        raise ConfigError(f"no report.json under {cell_dir}")
    report = TrainReport.load_json(report_path)
    if epoch not in report.attention_snapshots:
        have = sorted(report.attention_snapshots)
        raise ConfigError(f"no snapshot for epoch {epoch}; available: {have}")
    dest = Path(dest) if dest is not None else cell_dir
    dest.mkdir(parents=True, exist_ok=True)
    written = []
    for name, snaps in (("attention", report.attention_snapshots),
                        ("dissimilarity", report.dissimilarity_snapshots)):
        m = np.array(snaps[epoch])
        csv_path = dest / f"{name}_{epoch}.csv"
        pgm_path = dest / f"{name}_{epoch}.pgm"
        write_map_csv(csv_path, m)
        write_map_pgm(pgm_path, m)
        written.extend([csv_path, pgm_path])
    return written
