"""Continual knowledge-graph embedding with task-driven tokens."""

from ettckge._core import (  # noqa: F401
    EttckgeError,
    ShapeError,
    __version__,
    aligned_mask,
    compute_mask,
    distill_loss,
    diversity_loss,
    generate_synthetic,
    grad_check,
    load_sequence_stats,
    margin_loss,
    masked_embeddings,
    rank_query,
    run_continual,
    sample_negatives,
    transe_score,
)
