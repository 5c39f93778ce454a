"""Tie-aware evaluation harness for knowledge-graph link prediction."""

from .data import (
    Dataset,
    FilterIndex,
    Query,
    Triple,
    Vocab,
    build_dataset,
    filtered_candidates,
    load_dataset,
    parse_triples,
)
from .protocols import (
    EvalConfig,
    EvalReport,
    Metrics,
    TieProfile,
    aggregate,
    evaluate,
    rank_bottom,
    rank_random,
    rank_top,
    tie_profile,
)
from .scorers import (
    ConstantScorer,
    DistMultScorer,
    EmbeddingTable,
    Scorer,
    TiedReluScorer,
    TransEScorer,
    make_scorer,
    pathological_tied_relu,
)
from .training import TrainConfig, margin_loss, sample_negatives, train

__version__ = "0.1.0"

__all__ = [
    "ConstantScorer",
    "Dataset",
    "DistMultScorer",
    "EmbeddingTable",
    "EvalConfig",
    "EvalReport",
    "FilterIndex",
    "Metrics",
    "Query",
    "Scorer",
    "TieProfile",
    "TiedReluScorer",
    "TrainConfig",
    "TransEScorer",
    "Triple",
    "Vocab",
    "aggregate",
    "build_dataset",
    "evaluate",
    "filtered_candidates",
    "load_dataset",
    "make_scorer",
    "margin_loss",
    "parse_triples",
    "pathological_tied_relu",
    "rank_bottom",
    "rank_random",
    "rank_top",
    "sample_negatives",
    "tie_profile",
    "train",
]
