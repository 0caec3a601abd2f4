"""Directed tree and forest structure learning over zero-inflated compositional nodes."""
from ._backend import BACKEND
from .arborescence import (
    TreeStructure,
    WeightedDigraph,
    brute_force_search,
    build_augmented_graph,
    chu_liu_edmonds,
)
from .edge_model import (
    EdgeParams,
    EmConfig,
    EmFitResult,
    RootParams,
    em_fit,
    fit_root,
    predict,
    sample_risk,
)
from .metrics import RecoveryMetrics, compare_trees
from .risk import RiskTable, build_risk_table, edge_signals, tree_score
from .selection import CvConfig, CvReport, cross_validate, validation_risk
from .simplex import CompositionSample, kl_divergence, validate_composition
from .synthetic import GeneratorSpec, GroundTruth, sample_data, sample_ground_truth, simulate
from .theory import BoundInputs, recovery_bound, sample_complexity

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundInputs",
    "CompositionSample",
    "CvConfig",
    "CvReport",
    "EdgeParams",
    "EmConfig",
    "EmFitResult",
    "GeneratorSpec",
    "GroundTruth",
    "RecoveryMetrics",
    "RiskTable",
    "RootParams",
    "TreeStructure",
    "WeightedDigraph",
    "brute_force_search",
    "build_augmented_graph",
    "build_risk_table",
    "chu_liu_edmonds",
    "compare_trees",
    "cross_validate",
    "edge_signals",
    "em_fit",
    "fit_root",
    "kl_divergence",
    "predict",
    "recovery_bound",
    "sample_complexity",
    "sample_data",
    "sample_ground_truth",
    "sample_risk",
    "simulate",
    "tree_score",
    "validate_composition",
    "validation_risk",
]
