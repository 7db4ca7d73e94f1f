"""Experiment configuration: one JSON file describing a full run."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .train import DISTILLERS

OUTPUT_ROOT_ENV = "ABKD_OUT_ROOT"

SWEEPABLE = ("beta", "d_a", "distance", "subspace", "shared_proj")

_DEFAULT_SBM = {
    "kind": "sbm",
    "n_per_block": 100,
    "n_blocks": 4,
    "p_in": 0.1,
    "p_out": 0.01,
    "n_features": 16,
    "signal": 0.8,
    "seed": 7,
}


@dataclass
class ExperimentConfig:
    """Everything one run needs; serialized next to its results."""

    dataset: dict = field(default_factory=lambda: dict(_DEFAULT_SBM))
    teacher_layers: int = 3
    teacher_hidden: int = 64
    student_layers: int = 2
    student_hidden: int = 8
    distillers: list = field(default_factory=lambda: ["none", "abkd"])
    beta: float = 10.0
    alpha: float = 1.0
    d_a: int = 256
    distance: str = "euclidean"
    use_subspace: bool = True
    shared_att_proj: bool = False
    node_mean: bool = True
    add_self_loops: bool = True
    lr: float = 0.01
    epochs: int = 300
    teacher_epochs: int = 300
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    snapshot_every: int = 50
    weight_init_epochs: int = 1200
    weight_init_decay: float = 0.01
    subspace_weight_decay: float = 0.0
    out_dir: str = "runs/experiment"

    def validate(self) -> "ExperimentConfig":
        if not isinstance(self.dataset, dict) or "kind" not in self.dataset:
            raise ConfigError("dataset must be a dict with a 'kind' key")
        kind = self.dataset["kind"]
        if kind == "sbm":
            for key in ("n_per_block", "n_blocks", "p_in", "p_out", "n_features", "signal", "seed"):
                if key not in self.dataset:
                    raise ConfigError(f"sbm dataset missing {key!r}")
        elif kind == "citation":
            for key in ("content_path", "cites_path"):
                if key not in self.dataset:
                    raise ConfigError(f"citation dataset missing {key!r}")
        else:
            raise ConfigError(f"unknown dataset kind {kind!r}")
        if not self.distillers:
            raise ConfigError("at least one distiller required")
        for d in self.distillers:
            if d not in DISTILLERS:
                raise ConfigError(f"unknown distiller {d!r} (choose from {DISTILLERS})")
        if len(set(self.distillers)) != len(self.distillers):
            raise ConfigError("duplicate distillers in comparison set")
        if not self.seeds:
            raise ConfigError("at least one seed required")
        if min(self.teacher_layers, self.student_layers) < 1:
            raise ConfigError("layer counts must be >= 1")
        if min(self.teacher_hidden, self.student_hidden) < 1:
            raise ConfigError("hidden widths must be >= 1")
        if self.epochs < 1 or self.teacher_epochs < 1 or self.weight_init_epochs < 1:
            raise ConfigError("epoch counts must be >= 1")
        if self.beta < 0 or self.alpha < 0:
            raise ConfigError("beta and alpha must be non-negative")
        if self.d_a < 1:
            raise ConfigError("d_a must be positive")
        if self.distance not in ("euclidean", "cosine"):
            raise ConfigError("distance must be 'euclidean' or 'cosine'")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")
        if self.subspace_weight_decay < 0 or self.weight_init_decay < 0:
            raise ConfigError("weight decays must be non-negative")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()

    @classmethod
    def load_json(cls, path) -> "ExperimentConfig":
        try:
            with open(Path(path)) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(raw)

    def save_json(self, path):
        with open(Path(path), "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def resolved_out_dir(self) -> Path:
        """out_dir, rooted at the ABKD_OUT_ROOT env var when set and relative."""
        out = Path(self.out_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out
