"""Multi-view semi-supervised node classification on non-graph data.

Pipeline: per-view graph + soft-label learning, smoothness-weighted graph
fusion, PageRank-based re-weighting of labeled nodes, and a 2-layer GCN
trained on the concatenated soft labels with re-weighted cross-entropy,
scheduled pseudo-label cross-entropy and a Laplacian smoothness penalty.
"""

from rsgslm.dataset import (
    MultiViewDataset,
    SplitSpec,
    SynthSpec,
    generate_synthetic,
    load_dataset,
    make_split,
    normalize_columns,
    save_dataset,
)
from rsgslm.errors import ConfigError, DatasetError, NumericalError
from rsgslm.fusion import FusedGraph, fuse, normalized_operators, view_weight
from rsgslm.gcn import GcnParams, concat_features, forward, init_params, propagation_operator
from rsgslm.objective import LossConfig, LossBreakdown, schedule_wp, total_loss
from rsgslm.renode import (
    NodeWeightTable,
    ReNodeConfig,
    compute_node_weights,
    cosine_weights,
    personalized_pagerank,
    totoro_scores,
)
from rsgslm.trainer import (
    RunResult,
    TrainConfig,
    gradient_check,
    run_ablation_suite,
    run_repeated,
    train_baseline_multi,
    train_baseline_xstar,
    train_rsgslm,
)
from rsgslm.view_graph import SolverConfig, ViewGraphResult, simplex_project, solve_view_graph

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DatasetError",
    "FusedGraph",
    "GcnParams",
    "LossBreakdown",
    "LossConfig",
    "MultiViewDataset",
    "NodeWeightTable",
    "NumericalError",
    "ReNodeConfig",
    "RunResult",
    "SolverConfig",
    "SplitSpec",
    "SynthSpec",
    "TrainConfig",
    "ViewGraphResult",
    "compute_node_weights",
    "concat_features",
    "cosine_weights",
    "forward",
    "fuse",
    "generate_synthetic",
    "gradient_check",
    "init_params",
    "load_dataset",
    "make_split",
    "normalize_columns",
    "normalized_operators",
    "personalized_pagerank",
    "propagation_operator",
    "run_ablation_suite",
    "run_repeated",
    "save_dataset",
    "schedule_wp",
    "simplex_project",
    "solve_view_graph",
    "totoro_scores",
    "total_loss",
    "train_baseline_multi",
    "train_baseline_xstar",
    "train_rsgslm",
    "view_weight",
]
