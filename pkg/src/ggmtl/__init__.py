"""Graph-guided multi-task regression with a learned task graph.

Edge weights of a k-NN task graph are tuned by descending a validation
objective through the exact hypergradient of a graph-smoothed inner solve.
"""
from .config import ExperimentConfig, HyperParams, MultiTaskCsv, SplitSpec, SynthSpec
from .driver import FitResult, TraceRecord, baseline_fixed_graph, fit, predict
from .graph import (ClusterAssignment, TaskGraph, export_graph, knn_graph, markov_cluster,
                    prune)
from .hypergrad import (closed_form_edges, fd_hypergradient, hypergradient, outer_objective,
                        update_edges)
from .inner import (TaskData, dirichlet_energy, ols_per_task, reweights, solve_inner_l2,
                    solve_inner_sq)
from .linalg import ConvergenceError, SpdSolveReport, spd_solve
from .metrics import VeracityReport, normalize_adjacency, rmse, veracity
from .synth import GroundTruth, generate, ground_truth_graph

__version__ = "0.1.0"

__all__ = [
    "ClusterAssignment", "ConvergenceError", "ExperimentConfig", "FitResult", "GroundTruth",
    "HyperParams", "MultiTaskCsv", "SpdSolveReport", "SplitSpec", "SynthSpec", "TaskData",
    "TaskGraph", "TraceRecord", "VeracityReport", "baseline_fixed_graph", "closed_form_edges",
    "dirichlet_energy", "export_graph", "fd_hypergradient", "fit", "generate",
    "ground_truth_graph", "hypergradient", "knn_graph", "markov_cluster", "normalize_adjacency",
    "ols_per_task", "outer_objective", "predict", "prune", "reweights", "rmse",
    "solve_inner_l2", "solve_inner_sq", "spd_solve", "update_edges", "veracity",
]
