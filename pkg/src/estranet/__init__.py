"""Temporal community detection with a bound on estrangement between consecutive snapshots."""

from .chart import EvolutionChart, build_chart
from .dual import DualEvaluation, DualSolveResult, SolverConfig, evaluate_dual, solve_dual
from .graph import (
    NodeHierarchyMap,
    ParseError,
    SnapshotGraph,
    induce_graph,
    load_snapshots,
    write_snapshots,
)
from .lpa import BACKEND, ConvergenceError, RunConfig, best_label, hlpa, lpa_converge
from .pipeline import (
    LabelRegistry,
    PipelineConfig,
    TemporalResult,
    build_overlap_graph,
    map_labels,
    process_snapshot,
    run_pipeline,
)
from .quality import (
    EmptyGraphError,
    HistoryWeights,
    compute_history,
    estrangement,
    induce_history,
    lagrangian,
    modularity,
    search_objective,
    temporal_stability,
)
from .synthetic import HiddenGroupSpec, generate, planted_cohesion

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConvergenceError", "DualEvaluation", "DualSolveResult", "EmptyGraphError",
    "EvolutionChart", "HiddenGroupSpec", "HistoryWeights", "LabelRegistry", "NodeHierarchyMap",
    "ParseError", "PipelineConfig", "RunConfig", "SnapshotGraph", "SolverConfig", "TemporalResult",
    "best_label", "build_chart", "build_overlap_graph", "compute_history", "estrangement",
    "evaluate_dual", "generate", "hlpa", "induce_graph", "induce_history", "lagrangian",
    "load_snapshots", "lpa_converge", "map_labels", "modularity", "planted_cohesion",
    "process_snapshot", "run_pipeline", "search_objective", "solve_dual", "temporal_stability",
    "write_snapshots",
]
