"""Puzzle construction: segment, trim, downsample, permute, orchestrate.

All operations are pure functions over immutable inputs.  Clip boundaries
live on the resampled audio grid so every clip of one puzzle carries exactly
the same number of audio samples; frame selection is nearest-timestamp
against linearly spaced targets that include both span endpoints.
"""

from __future__ import annotations

import hashlib
import random
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import BuildConfig
from .imageops import rescale_to_budget
from .media import resample_audio
from .prompts import rollout_prompt_id
from .types import (AvJigsawError, Clip, Modality, OmniSample, Permutation,
                    PuzzleInstance, Strategy)

MIN_CLIP_SECONDS = 1.0   # minimum viable pre-trim span


class BuildError(AvJigsawError):
    pass


def _nearest_indices(frame_ts: np.ndarray, targets: np.ndarray) -> np.ndarray:
    return np.abs(frame_ts[None, :] - targets[:, None]).argmin(axis=1)


def segment_and_trim(sample: OmniSample, config: BuildConfig) -> List[Clip]:
    """Cut a sample into N equal spans, trim both ends, align to the shortest.

    Trimming removes ``trim_ratio`` of each span's duration from its head and
    tail so adjacent clips never share boundary frames.  Audio is resampled to
    the target rate first and sliced on that grid; all clips are then cut to
    the same sample count, which pins clip durations exactly equal.
    """
    n = config.n_clips
    span = sample.duration / n
    if span < MIN_CLIP_SECONDS:
        raise BuildError("TOO_SHORT",
                         f"{sample.duration:.2f}s / {n} clips leaves {span:.2f}s spans")
    if not (sample.has_video and sample.has_audio):
        raise BuildError("MISSING_STREAM", "puzzle building requires both streams")

    trim = config.trim_ratio * span
    starts = [i * span + trim for i in range(n)]
    trimmed_dur = span - 2.0 * trim

    rate = config.audio_rate_hz
    audio = resample_audio(sample.audio, sample.audio_rate_hz, rate)
    # clamp to the real waveform: a decode that ran a few samples short must
    # shorten every clip equally, not just the last one
    bounds = [(min(int(round(t0 * rate)), len(audio)),
               min(int(round((t0 + trimmed_dur) * rate)), len(audio))) for t0 in starts]
    n_samples = min(b1 - b0 for b0, b1 in bounds)
    if n_samples <= 0:
        raise BuildError("TOO_SHORT", "audio stream ends before the final trimmed span")
    duration = n_samples / rate

    clips = []
    for i, (t0, (a0, _)) in enumerate(zip(starts, bounds), start=1):
        seg_audio = audio[a0: a0 + n_samples]
        in_span = (sample.frame_ts >= t0 - 1e-9) & (sample.frame_ts <= t0 + duration + 1e-9)
        idx = np.flatnonzero(in_span)
        if len(idx) == 0:
            idx = np.array([np.abs(sample.frame_ts - (t0 + duration / 2)).argmin()])
        clips.append(Clip(
            orig_index=i,
            frames=sample.frames[idx],
            frame_ts=sample.frame_ts[idx] - t0,
            audio=seg_audio,
            duration=duration,
            video_present=True,
            audio_present=True,
            audio_rate_hz=rate,
        ))
    return clips


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def downsample_frames(clip: Clip, config: BuildConfig) -> Clip:
    """Keep k = clamp(round(duration * fps), min, max) frames at linspaced times.

    Target timestamps include both endpoints of the trimmed span; each target
    maps to the nearest stored frame.
    """
    if not clip.video_present:
        raise BuildError("NO_VIDEO_STREAM", "cannot downsample a masked clip")
    k = min(max(_round_half_up(clip.duration * config.target_fps), config.min_frames),
            config.max_frames)
    targets = np.linspace(0.0, clip.duration, k)
    idx = _nearest_indices(clip.frame_ts, targets)
    return Clip(
        orig_index=clip.orig_index,
        frames=clip.frames[idx],
        frame_ts=clip.frame_ts[idx],
        audio=clip.audio,
        duration=clip.duration,
        video_present=True,
        audio_present=clip.audio_present,
        audio_rate_hz=clip.audio_rate_hz,
    )


def prepare_clips(sample: OmniSample, config: BuildConfig) -> List[Clip]:
    """segment + trim, then per-clip frame downsampling and budgeted rescale."""
    clips = []
    for clip in segment_and_trim(sample, config):
        clip = downsample_frames(clip, config)
        frames = rescale_to_budget(clip.frames, config.pixel_budget, config.patch)
        clips.append(Clip(
            orig_index=clip.orig_index, frames=frames, frame_ts=clip.frame_ts,
            audio=clip.audio, duration=clip.duration, video_present=True,
            audio_present=True, audio_rate_hz=clip.audio_rate_hz,
        ))
    return clips


def sample_permutation(n: int, rng_seed: int) -> Permutation:
    """Uniform permutation of {1..n} via seeded Fisher-Yates; stable per seed."""
    if n < 2:
        raise BuildError("N_TOO_SMALL", "a puzzle needs at least 2 clips")
    rng = random.Random(rng_seed)
    forward = list(range(1, n + 1))
    for i in range(n - 1, 0, -1):
        j = rng.randrange(i + 1)
        forward[i], forward[j] = forward[j], forward[i]
    return Permutation.from_forward(forward)


def derive_seed(global_seed: int, sample_id: str) -> int:
    """Stable per-sample 63-bit seed from the corpus seed and sample id."""
    digest = hashlib.sha256(f"{global_seed}:{sample_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def mask_clip(clip: Clip, keep: Modality) -> Clip:
    """Null the unselected modality: empty payload plus a cleared flag."""
    if keep is Modality.VA:
        return clip
    if keep is Modality.V:
        return Clip(orig_index=clip.orig_index, frames=clip.frames,
                    frame_ts=clip.frame_ts, audio=np.zeros(0, np.float32),
                    duration=clip.duration, video_present=clip.video_present,
                    audio_present=False, audio_rate_hz=clip.audio_rate_hz)
    return Clip(orig_index=clip.orig_index, frames=np.zeros((0, 0, 0, 3), np.uint8),
                frame_ts=np.zeros(0, np.float64), audio=clip.audio,
                duration=clip.duration, video_present=False,
                audio_present=clip.audio_present, audio_rate_hz=clip.audio_rate_hz)


_STRATEGY_KEEP = {Strategy.JMI: Modality.VA, Strategy.VIDEO: Modality.V,
                  Strategy.AUDIO: Modality.A}


def shuffle_and_orchestrate(clips: Sequence[Clip], permutation: Permutation,
                            strategy: Strategy, *, sample_id: str, rng_seed: int,
                            dominance: Optional[Modality] = None,
                            modality_vector: Optional[Sequence[Modality]] = None) -> PuzzleInstance:
    """Apply the strategy's masking to chronological clips, then shuffle them.

    Masking keys on the chronological index, so the clip shown at shuffled
    position j carries the mask decided for original clip inverse(j).
    """
    n = len(clips)
    if permutation.n != n:
        raise BuildError("VECTOR_LENGTH_MISMATCH", "permutation size != clip count")
    if strategy is Strategy.SMS:
        if dominance not in (Modality.V, Modality.A):
            raise BuildError("MISSING_DOMINANCE", "SMS requires dominance V or A")
        keeps = [dominance] * n
    elif strategy is Strategy.CMM:
        if modality_vector is None or len(modality_vector) != n:
            raise BuildError("VECTOR_LENGTH_MISMATCH",
                             f"CMM needs a length-{n} modality vector")
        keeps = [Modality(m) for m in modality_vector]
    else:
        keeps = [_STRATEGY_KEEP[strategy]] * n
        dominance = None
        modality_vector = None

    masked = [mask_clip(clip, keep) for clip, keep in zip(clips, keeps)]
    shuffled = permutation.shuffle(masked)
    return PuzzleInstance(
        sample_id=sample_id,
        n_clips=n,
        strategy=strategy,
        shuffled_clips=tuple(shuffled),
        permutation=permutation,
        prompt_id=rollout_prompt_id(strategy, dominance),
        rng_seed=rng_seed,
        dominance=dominance if strategy is Strategy.SMS else None,
        modality_vector=tuple(keeps) if strategy is Strategy.CMM else None,
    )


def build_dominance_context(sample: OmniSample,
                            config: BuildConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Global judge context: frames at judge_fps over the whole span (capped),
    plus the untouched audio track."""
    if not (sample.has_video and sample.has_audio):
        raise BuildError("MISSING_STREAM", "dominance context requires both streams")
    k = min(max(int(sample.duration * config.judge_fps), 1), config.judge_max_frames)
    targets = np.linspace(0.0, sample.duration, k, endpoint=False)
    idx = _nearest_indices(sample.frame_ts, targets)
    return sample.frames[idx], sample.audio


def extract_audio_for_frames(sample: OmniSample, frame_timestamps: Sequence[float],
                             max_audio_s: float = 600.0) -> np.ndarray:
    """Audio aligned to a frame-sampled view of a long recording.

    When the sampled frames span at most ``max_audio_s`` the raw segment
    between the first and last frame is returned.  For wider spans the budget
    is split evenly into per-frame chunks centered on each frame timestamp,
    zero-padded where a chunk reaches past the waveform, and concatenated in
    frame order.
    """
    if not sample.has_audio:
        raise BuildError("NO_AUDIO_STREAM", sample.id)
    ts = list(frame_timestamps)
    if not ts or any(b < a for a, b in zip(ts, ts[1:])):
        raise BuildError("BAD_TIMESTAMPS", "timestamps must be non-empty and ascending")
    rate = sample.audio_rate_hz
    audio = sample.audio
    span = ts[-1] - ts[0]
    if span <= max_audio_s:
        i0 = int(round(ts[0] * rate))
        i1 = int(round(ts[-1] * rate))
        return audio[max(i0, 0): max(i1, 0)]

    chunk_s = max_audio_s / len(ts)
    chunk_len = int(round(chunk_s * rate))
    pieces = []
    for t in ts:
        i0 = int(round((t - chunk_s / 2.0) * rate))
        piece = np.zeros(chunk_len, dtype=audio.dtype)
        src0 = max(i0, 0)
        src1 = min(i0 + chunk_len, len(audio))
        if src1 > src0:
            piece[src0 - i0: src1 - i0] = audio[src0:src1]
        pieces.append(piece)
    return np.concatenate(pieces) if pieces else np.zeros(0, dtype=audio.dtype)


def build_puzzle(sample: OmniSample, config: BuildConfig, strategy: Strategy, *,
                 rng_seed: Optional[int] = None,
                 dominance: Optional[Modality] = None,
                 modality_vector: Optional[Sequence[Modality]] = None) -> PuzzleInstance:
    """End-to-end construction of one puzzle from a filtered sample."""
    seed = rng_seed if rng_seed is not None else derive_seed(config.rng_seed, sample.id)
    clips = prepare_clips(sample, config)
    permutation = sample_permutation(len(clips), seed)
    return shuffle_and_orchestrate(clips, permutation, strategy,
                                   sample_id=sample.id, rng_seed=seed,
                                   dominance=dominance, modality_vector=modality_vector)
