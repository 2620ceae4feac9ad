"""Thin bridge between RL training frameworks and the avjigsaw toolkit.

Scoring is never re-implemented here: every reward is produced by the
primary ``avjigsaw score`` CLI across a process boundary, so there is one
source of truth for the composite reward.  Data access goes through the
published manifest and puzzle-package file formats.
"""

__version__ = "0.1.0"

from .data import EmptyManifestError, PuzzleRef, built_records, iterate_puzzles, train_val_split
from .scoring import (BridgeError, BridgeScoreRequest, compute_score,
                      compute_score_with_breakdown, score_batch)

__all__ = [
    "BridgeError", "BridgeScoreRequest", "score_batch",
    "compute_score", "compute_score_with_breakdown",
    "EmptyManifestError", "PuzzleRef", "built_records",
    "iterate_puzzles", "train_val_split",
]
