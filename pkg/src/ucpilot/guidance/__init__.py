"""Learned branching guidance and guarded separator configuration."""
from ..cuts import SeparatorConfig
from .features import BipartiteGraph, EncodingFailed, PresolveDiagnostics, encode_bipartite, presolve_diagnostics
from .labels import strong_branching_labels
from .priorities import scores_to_priorities
from .scorer import DegenerateDataset, ScorerParams, score_graph, train_scorer
from .sepconfig import PolicyUnavailable, configure_separators, guard_config

__all__ = [
    "BipartiteGraph", "EncodingFailed", "PresolveDiagnostics", "encode_bipartite",
    "presolve_diagnostics", "strong_branching_labels", "scores_to_priorities",
    "DegenerateDataset", "ScorerParams", "score_graph", "train_scorer",
    "SeparatorConfig", "PolicyUnavailable", "configure_separators", "guard_config",
]
