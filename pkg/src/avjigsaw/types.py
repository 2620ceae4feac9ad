"""Shared domain types for the jigsaw curation and grading toolkit.

Everything here is an immutable value object; no I/O, no policy.  All
serialized index fields are 1-based (clip labels, answers, permutations),
matching the prompt and answer conventions used throughout.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SCHEMA_VERSION = 1


class AvJigsawError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class Strategy(str, enum.Enum):
    """Modality orchestration strategy applied when building a puzzle."""

    JMI = "JMI"      # joint: keep video and audio in every clip
    SMS = "SMS"      # sample-level: keep only the dominant modality
    CMM = "CMM"      # clip-level: per-clip V / A / VA masking
    VIDEO = "VIDEO"  # uni-modal: video only, all clips
    AUDIO = "AUDIO"  # uni-modal: audio only, all clips


class Modality(str, enum.Enum):
    V = "V"
    A = "A"
    VA = "VA"


class RejectReason(str, enum.Enum):
    INVALID = "INVALID"                      # unreadable / not a media file
    TOO_LONG = "TOO_LONG"
    MISSING_STREAM = "MISSING_STREAM"
    STATIC_VIDEO = "STATIC_VIDEO"
    SILENCE = "SILENCE"
    LOW_FLUX = "LOW_FLUX"
    VAD_OUT_OF_BOUNDS = "VAD_OUT_OF_BOUNDS"
    VAD_ERROR = "VAD_ERROR"
    SEMANTIC_NO = "SEMANTIC_NO"
    TOO_SHORT = "TOO_SHORT"


@dataclass(frozen=True)
class MediaMeta:
    """Container-level metadata, obtained without decoding payload streams."""

    duration_s: float
    has_video: bool
    has_audio: bool
    width: int = 0
    height: int = 0
    source_sample_rate_hz: int = 0
    source: Optional[str] = None

    def __post_init__(self):
        if self.duration_s < 0:
            raise AvJigsawError("BAD_META", "duration_s must be >= 0")
        if self.has_video and (self.width <= 0 or self.height <= 0):
            raise AvJigsawError("BAD_META", "video stream requires positive dimensions")

    def to_dict(self) -> dict:
        return {
            "duration_s": self.duration_s,
            "has_video": self.has_video,
            "has_audio": self.has_audio,
            "width": self.width,
            "height": self.height,
            "source_sample_rate_hz": self.source_sample_rate_hz,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MediaMeta":
        return cls(
            duration_s=d["duration_s"],
            has_video=d["has_video"],
            has_audio=d["has_audio"],
            width=d.get("width", 0),
            height=d.get("height", 0),
            source_sample_rate_hz=d.get("source_sample_rate_hz", 0),
            source=d.get("source"),
        )


@dataclass(frozen=True, eq=False)
class OmniSample:
    """One source recording: synchronized frames + waveform + probed metadata.

    ``frames`` is (T, H, W, 3) uint8 and ``frame_ts`` holds one strictly
    increasing timestamp in seconds per frame.  ``audio`` is a float waveform
    in [-1, 1] at ``audio_rate_hz``.  Missing streams are zero-length arrays
    with the matching flag cleared.
    """

    id: str
    frames: np.ndarray
    frame_ts: np.ndarray
    audio: np.ndarray
    audio_rate_hz: int
    duration: float
    has_video: bool
    has_audio: bool
    source_path: str = ""
    source: Optional[str] = None

    def __post_init__(self):
        if self.duration <= 0:
            raise AvJigsawError("BAD_SAMPLE", "duration must be > 0")
        if self.has_video:
            if len(self.frames) < 1:
                raise AvJigsawError("BAD_SAMPLE", "has_video requires at least one frame")
            if len(self.frames) != len(self.frame_ts):
                raise AvJigsawError("BAD_SAMPLE", "frames and frame_ts length mismatch")
            if len(self.frame_ts) > 1 and not np.all(np.diff(self.frame_ts) > 0):
                raise AvJigsawError("BAD_SAMPLE", "frame timestamps must be strictly increasing")
        if self.has_audio and len(self.audio) < 1:
            raise AvJigsawError("BAD_SAMPLE", "has_audio requires at least one sample")


@dataclass(frozen=True, eq=False)
class Clip:
    """One temporal segment of a sample.

    ``orig_index`` is the 1-based chronological position of the clip in its
    source.  A masked modality carries an empty payload and a cleared flag.
    """

    orig_index: int
    frames: np.ndarray
    frame_ts: np.ndarray
    audio: np.ndarray
    duration: float
    video_present: bool
    audio_present: bool
    audio_rate_hz: int = 16000

    def __post_init__(self):
        if self.orig_index < 1:
            raise AvJigsawError("BAD_CLIP", "orig_index is 1-based")
        if not self.video_present and len(self.frames) != 0:
            raise AvJigsawError("BAD_CLIP", "masked video must have an empty frame payload")
        if not self.audio_present and len(self.audio) != 0 and np.any(self.audio):
            raise AvJigsawError("BAD_CLIP", "masked audio must be empty or all-zero")

    def meta_dict(self) -> dict:
        return {
            "orig_index": self.orig_index,
            "duration_s": self.duration,
            "n_frames": int(len(self.frames)),
            "video_present": self.video_present,
            "audio_present": self.audio_present,
        }


@dataclass(frozen=True)
class Permutation:
    """A bijection of {1..N} with its inverse.

    ``forward[i-1]`` is the shuffled position of the chronologically i-th
    clip; reading ``forward`` in order is therefore the ground-truth answer.
    ``inverse[j-1]`` is the chronological index of the clip shown at shuffled
    position j.
    """

    forward: tuple
    inverse: tuple

    def __post_init__(self):
        n = len(self.forward)
        if sorted(self.forward) != list(range(1, n + 1)):
            raise AvJigsawError("BAD_PERMUTATION", "forward is not a bijection of 1..N")
        if len(self.inverse) != n or any(self.forward[self.inverse[j] - 1] != j + 1 for j in range(n)):
            raise AvJigsawError("BAD_PERMUTATION", "inverse does not invert forward")

    @classmethod
    def from_forward(cls, forward: Sequence[int]) -> "Permutation":
        forward = tuple(int(x) for x in forward)
        inverse = [0] * len(forward)
        for i, j in enumerate(forward, start=1):
            inverse[j - 1] = i
        return cls(forward=forward, inverse=tuple(inverse))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls.from_forward(range(1, n + 1))

    @property
    def n(self) -> int:
        return len(self.forward)

    @property
    def answer(self) -> list:
        """Ground-truth answer sequence [forward(1), ..., forward(N)]."""
        return list(self.forward)

    def shuffle(self, items: Sequence) -> list:
        """Place chronological items into shuffled order: out[j] = items[inverse(j)]."""
        if len(items) != self.n:
            raise AvJigsawError("BAD_PERMUTATION", "item count does not match permutation size")
        return [items[self.inverse[j] - 1] for j in range(self.n)]


@dataclass(frozen=True, eq=False)
class PuzzleInstance:
    """A shuffled clip sequence with its hidden ordering and prompt binding."""

    sample_id: str
    n_clips: int
    strategy: Strategy
    shuffled_clips: tuple
    permutation: Permutation
    prompt_id: str
    rng_seed: int
    dominance: Optional[Modality] = None
    modality_vector: Optional[tuple] = None

    def __post_init__(self):
        if self.n_clips != len(self.shuffled_clips) or self.n_clips != self.permutation.n:
            raise AvJigsawError("BAD_PUZZLE", "clip count / permutation size mismatch")
        for j, clip in enumerate(self.shuffled_clips, start=1):
            if clip.orig_index != self.permutation.inverse[j - 1]:
                raise AvJigsawError("BAD_PUZZLE", f"clip at position {j} has wrong orig_index")
        if self.strategy is Strategy.SMS:
            if self.dominance is None or self.dominance is Modality.VA:
                raise AvJigsawError("MISSING_DOMINANCE", "SMS requires dominance V or A")
        elif self.dominance is not None:
            raise AvJigsawError("BAD_PUZZLE", "dominance only valid under SMS")
        if self.strategy is Strategy.CMM:
            if self.modality_vector is None or len(self.modality_vector) != self.n_clips:
                raise AvJigsawError("VECTOR_LENGTH_MISMATCH", "CMM requires a modality vector of length N")
        elif self.modality_vector is not None:
            raise AvJigsawError("BAD_PUZZLE", "modality_vector only valid under CMM")

    @property
    def ground_truth(self) -> list:
        return self.permutation.answer


@dataclass(frozen=True)
class RewardBreakdown:
    """All composite-reward components for one graded rollout.

    Invariant: r_total == r_rep + r_fmt + lam * (0.5 * r_pos + 0.5 * r_cont),
    computed in exactly that order so serialized totals are bit-reproducible.
    """

    r_pos: float
    r_cont: float
    lam: float
    r_fmt: float
    r_rep: float
    r_total: float
    format_ok: bool
    parsed_ok: bool
    perfect: bool

    def to_dict(self) -> dict:
        # fixed key order, serialized under the reward's published names
        return {
            "r_pos": self.r_pos,
            "r_cont": self.r_cont,
            "lambda": self.lam,
            "r_fmt": self.r_fmt,
            "r_rep": self.r_rep,
            "r_total": self.r_total,
            "format_ok": self.format_ok,
            "parsed_ok": self.parsed_ok,
            "perfect": self.perfect,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardBreakdown":
        return cls(
            r_pos=d["r_pos"],
            r_cont=d["r_cont"],
            lam=d["lambda"],
            r_fmt=d["r_fmt"],
            r_rep=d["r_rep"],
            r_total=d["r_total"],
            format_ok=d["format_ok"],
            parsed_ok=d["parsed_ok"],
            perfect=d["perfect"],
        )


@dataclass(frozen=True)
class Stage1Report:
    """Signal-stage metrics; fields stay None past the first failed check."""

    duration_ok: bool
    streams_ok: bool
    static_ratio: Optional[float] = None
    silence_ratio: Optional[float] = None
    flux_variance: Optional[float] = None
    speech_ratio: Optional[float] = None
    passed: bool = False
    reject_reason: Optional[RejectReason] = None

    def __post_init__(self):
        if (self.reject_reason is None) != self.passed:
            raise AvJigsawError("BAD_REPORT", "reject_reason must be set iff pass is false")

    def to_dict(self) -> dict:
        return {
            "duration_ok": self.duration_ok,
            "streams_ok": self.streams_ok,
            "static_ratio": self.static_ratio,
            "silence_ratio": self.silence_ratio,
            "flux_variance": self.flux_variance,
            "speech_ratio": self.speech_ratio,
            "pass": self.passed,
            "reject_reason": self.reject_reason.value if self.reject_reason else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Stage1Report":
        reason = d.get("reject_reason")
        return cls(
            duration_ok=d["duration_ok"],
            streams_ok=d["streams_ok"],
            static_ratio=d.get("static_ratio"),
            silence_ratio=d.get("silence_ratio"),
            flux_variance=d.get("flux_variance"),
            speech_ratio=d.get("speech_ratio"),
            passed=d["pass"],
            reject_reason=RejectReason(reason) if reason else None,
        )


@dataclass(frozen=True)
class Stage2Report:
    """Semantic screening verdict for one sample."""

    think_text: str
    decision: str          # "YES" or "NO"
    coherent: bool
    passed: bool

    def __post_init__(self):
        if self.passed != (self.decision == "YES" and self.coherent):
            raise AvJigsawError("BAD_REPORT", "stage2 pass must equal (decision==YES and coherent)")

    def to_dict(self) -> dict:
        return {
            "think_text": self.think_text,
            "decision": self.decision,
            "coherent": self.coherent,
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Stage2Report":
        return cls(
            think_text=d["think_text"],
            decision=d["decision"],
            coherent=d["coherent"],
            passed=d["pass"],
        )


@dataclass(frozen=True)
class FilterReport:
    """Per-sample filtering outcome across both stages."""

    sample_id: str
    stage1: Optional[Stage1Report] = None
    stage2: Optional[Stage2Report] = None

    @property
    def passed(self) -> bool:
        return (self.stage1 is not None and self.stage1.passed
                and self.stage2 is not None and self.stage2.passed)

    @property
    def reject_reason(self) -> Optional[RejectReason]:
        """Effective reason: the stage-1 reason, or SEMANTIC_NO for a stage-2 veto."""
        if self.stage1 is not None and not self.stage1.passed:
            return self.stage1.reject_reason
        if self.stage2 is not None and not self.stage2.passed:
            return RejectReason.SEMANTIC_NO
        return None

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "stage1": self.stage1.to_dict() if self.stage1 else None,
            "stage2": self.stage2.to_dict() if self.stage2 else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterReport":
        return cls(
            sample_id=d["sample_id"],
            stage1=Stage1Report.from_dict(d["stage1"]) if d.get("stage1") else None,
            stage2=Stage2Report.from_dict(d["stage2"]) if d.get("stage2") else None,
        )


@dataclass(frozen=True)
class ScreeningVerdict:
    """Parsed CoT verdict from the semantic assessor (fail-closed)."""

    think_text: str
    decision: str        # "YES" or "NO"
    coherent: bool
    raw: str

    @property
    def retained(self) -> bool:
        return self.decision == "YES" and self.coherent
