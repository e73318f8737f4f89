"""Topology privacy toolkit for graph neural networks.

Black-box attacks that reconstruct a model's training edges, a
prediction-guided graph reconstruction defense, edge differential privacy
baselines, and a config-driven audit harness that measures leakage and
utility side by side.
"""

from .attacks import (AttackConfig, AttackResult, BudgetExceedsPairs,
                      InsufficientPairs, RefinementExhaustsCandidates,
                      ShadowTooSmall, c_tia, i_tia, influence_score,
                      lmia_accuracy, m_tia, pairwise_similarity, pgr_tia,
                      random_baseline)
from .data_io import (BadMagic, DimensionMismatch, InconsistentFeatureWidth,
                      MalformedLine, NonSymmetricInput, TruncatedFile,
                      VersionMismatch, generate_sbm, load_graph_dir,
                      load_model, load_planetoid, save_graph_dir, save_model)
from .edge_dp import DpConfig, DpRelease, dp_pgr, edge_rand, lap_edge, make_release
from .gnn import (BlackBox, GcnModel, TrainConfig, accuracy, gcn_forward,
                  make_black_box, predict_labels, train)
from .graphs import (EdgeSet, Graph, InvalidGraph, OverlapCounts, Subgraph,
                     bfs_sample, bfs_sample_excluding, complement_mask,
                     edge_set, normalized_adjacency, overlap)
from .harness import (ConfigError, ExperimentConfig, RunResult, UnknownAxis,
                      emit_plot_data, factor_sweep, load_config, resolve_k_hat,
                      run_experiment)
from .metrics import TplReport, ZeroBaseline, accuracy_loss, influential_node_f1, tpl
from .numerics import EmptyNodeSet, ShapeMismatch, finite_diff, softmax_rows
from .pgr import (NoCandidate, NonFinite, PgrConfig, PgrOutput, meta_gradient,
                  pgr_convergence_mode, pgr_run, select_edge)
from .plotting import render_report

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "AttackResult", "BadMagic", "BlackBox",
    "BudgetExceedsPairs", "ConfigError", "DimensionMismatch", "DpConfig",
    "DpRelease", "EdgeSet", "EmptyNodeSet", "ExperimentConfig", "GcnModel",
    "Graph", "InconsistentFeatureWidth", "InsufficientPairs", "InvalidGraph",
    "MalformedLine", "NoCandidate", "NonFinite", "NonSymmetricInput",
    "OverlapCounts", "PgrConfig", "PgrOutput", "RefinementExhaustsCandidates",
    "RunResult",
    "ShadowTooSmall", "ShapeMismatch", "Subgraph", "TplReport", "TrainConfig",
    "TruncatedFile", "UnknownAxis", "VersionMismatch", "ZeroBaseline",
    "accuracy", "accuracy_loss", "bfs_sample", "bfs_sample_excluding",
    "c_tia", "complement_mask",
    "dp_pgr", "edge_rand", "edge_set", "emit_plot_data", "factor_sweep",
    "finite_diff", "gcn_forward", "generate_sbm", "i_tia", "influence_score",
    "influential_node_f1", "lap_edge", "lmia_accuracy", "load_config",
    "load_graph_dir", "load_model", "load_planetoid", "m_tia",
    "make_black_box", "make_release", "meta_gradient", "normalized_adjacency",
    "overlap", "pairwise_similarity", "pgr_convergence_mode", "pgr_run",
    "pgr_tia", "predict_labels", "random_baseline", "render_report",
    "resolve_k_hat", "run_experiment", "save_graph_dir", "save_model",
    "select_edge", "softmax_rows", "tpl", "train",
]
