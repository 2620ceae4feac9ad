"""avjigsaw: temporal-reordering puzzle curation and verifiable grading.

The toolkit turns raw audio-video samples into solvable clip-reordering
puzzles under five modality orchestration strategies (joint, sample-level
selection, clip-level masking, and the two uni-modal variants) and grades
model rollouts with a deterministic composite reward.
"""

__version__ = "0.1.0"

from .config import BuildConfig, FilterConfig, InferenceConfig, PipelineConfig, load_config
from .reward import (continuity_accuracy, grade_exhaustive, grade_rollout,
                     positional_accuracy, repetition_penalty, total_reward)
from .rollout import ParsedRollout, check_format, parse_index_sequence, parse_rollout
from .types import (Clip, FilterReport, MediaMeta, Modality, OmniSample,
                    Permutation, PuzzleInstance, RejectReason, RewardBreakdown,
                    Strategy)

__all__ = [
    "BuildConfig", "FilterConfig", "InferenceConfig", "PipelineConfig", "load_config",
    "continuity_accuracy", "grade_exhaustive", "grade_rollout",
    "positional_accuracy", "repetition_penalty", "total_reward",
    "ParsedRollout", "check_format", "parse_index_sequence", "parse_rollout",
    "Clip", "FilterReport", "MediaMeta", "Modality", "OmniSample",
    "Permutation", "PuzzleInstance", "RejectReason", "RewardBreakdown", "Strategy",
]
