"""Coreset selection by Jensen-Shannon divergence band scoring.

Selectors score training samples against their class cluster centers and
keep a fraction of them; a small trainable classifier and a benchmark CLI
make the efficiency/accuracy trade-off measurable end to end.
"""

from ._kernels import BACKEND
from .datamodel import (
    FeatureDataset,
    SelectionResult,
    SyntheticSpec,
    TrainConfig,
    generate_synthetic,
    load_dataset,
    load_selection,
    save_dataset,
    save_selection,
    split_dataset,
)
from .divergence import ScoreTable, jsd, kl, mi_scores, softmax
from .errors import (
    ConfigurationError,
    CoreselectError,
    NumericError,
    ParseError,
    ShapeError,
    ValidationError,
)
from .metrics import MetricsReport, confusion_matrix, report
from .selection import (
    ClusterCenterSet,
    EpochTrace,
    METHODS,
    avg_mi,
    cluster_centers,
    core_set_size,
    forgetting_counts,
    load_trace,
    save_trace,
    select,
    select_forgetting,
    select_full,
    select_jscds,
    select_kcenter_greedy,
    select_moderate,
    select_random,
)
from .trainer import (
    ClassifierState,
    TrainReport,
    embed,
    forward,
    init_model,
    load_model,
    loss_and_grad,
    predict,
    save_model,
    train_with_reselection,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ClassifierState",
    "ClusterCenterSet",
    "ConfigurationError",
    "CoreselectError",
    "EpochTrace",
    "FeatureDataset",
    "METHODS",
    "MetricsReport",
    "NumericError",
    "ParseError",
    "ScoreTable",
    "SelectionResult",
    "ShapeError",
    "SyntheticSpec",
    "TrainConfig",
    "TrainReport",
    "ValidationError",
    "avg_mi",
    "cluster_centers",
    "confusion_matrix",
    "core_set_size",
    "embed",
    "forgetting_counts",
    "forward",
    "generate_synthetic",
    "init_model",
    "jsd",
    "kl",
    "load_dataset",
    "load_model",
    "load_selection",
    "load_trace",
    "loss_and_grad",
    "mi_scores",
    "predict",
    "report",
    "save_dataset",
    "save_model",
    "save_selection",
    "save_trace",
    "select",
    "select_forgetting",
    "select_full",
    "select_jscds",
    "select_kcenter_greedy",
    "select_moderate",
    "select_random",
    "softmax",
    "split_dataset",
    "train_with_reselection",
]
