"""Attention-based knowledge distillation for graph convolutional networks.

A self-contained desk-scale stack: CSR sparse graphs, a small reverse-mode
autodiff, GCN models exposing per-layer pre-activations, the attention /
dissimilarity distillation head with baseline distillers, and seeded,
reproducible experiment drivers.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .autodiff import (
    Gradients,
    Tape,
    Tensor,
    backward,
    finite_diff_grad,
    load_tensors,
    save_tensors,
)
from .config import ExperimentConfig
from .data import GraphDataset, generate_sbm, load_citation_dataset, save_citation_format
from .distill import (
    AbkdHead,
    AttentionMap,
    CouplingReport,
    DissimilarityMap,
    abkd_loss,
    attention_map,
    dissimilarity_map,
    fitnet_last_layer_mse,
    modified_abkd_mask,
    softkd_loss,
    total_loss,
    verify_theorem1,
)
from .gcn import (
    ForwardRecord,
    GcnLayer,
    GcnModel,
    accuracy,
    forward,
    load_model,
    save_model,
    supervised_loss,
)
from .sparse import CsrMatrix, degree_vector, normalize_adjacency, spmm, spmm_t
from .train import Adam, DistillConfig, TrainReport, adam_step, distill_student, train_teacher

__version__ = "0.1.0"

__all__ = [
    "AbkdHead",
    "Adam",
    "AttentionMap",
    "CouplingReport",
    "CsrMatrix",
    "DissimilarityMap",
    "DistillConfig",
    "ExperimentConfig",
    "ForwardRecord",
    "GcnLayer",
    "GcnModel",
    "Gradients",
    "GraphDataset",
    "KERNEL_BACKEND",
    "Tape",
    "Tensor",
    "TrainReport",
    "abkd_loss",
    "accuracy",
    "adam_step",
    "attention_map",
    "backward",
    "degree_vector",
    "dissimilarity_map",
    "distill_student",
    "fitnet_last_layer_mse",
    "finite_diff_grad",
    "forward",
    "generate_sbm",
    "load_citation_dataset",
    "load_model",
    "load_tensors",
    "modified_abkd_mask",
    "normalize_adjacency",
    "save_citation_format",
    "save_model",
    "save_tensors",
    "softkd_loss",
    "spmm",
    "spmm_t",
    "supervised_loss",
    "total_loss",
    "train_teacher",
    "verify_theorem1",
]
