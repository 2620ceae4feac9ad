"""Judge and selector answer parsing plus the endpoint round trips.

Unparseable judge/selector outputs are retried once and then fall back to
the least destructive choice (dominance V; an all-VA vector, i.e. no
masking) so a flaky endpoint degrades SMS/CMM toward the joint strategy
instead of corrupting puzzles.
"""

from __future__ import annotations

import json
import logging
import re
from typing import List, Sequence, Tuple

import numpy as np

from .builder import build_dominance_context
from .config import BuildConfig, InferenceConfig
from .imageops import rescale_to_budget
from .inference import HttpError, InferenceClient, TransportError, user_message
from .prompts import CMM_SELECTOR, SMS_JUDGE, get_prompt, render_rollout_prompt
from .types import AvJigsawError, Clip, Modality, OmniSample

log = logging.getLogger(__name__)

_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)


class SelectorParseError(AvJigsawError):
    pass


def parse_dominance_answer(raw: str) -> Modality:
    """Single V or A inside the answer block; case-insensitive, whitespace-tolerant."""
    m = _ANSWER_RE.search(raw)
    if not m:
        raise SelectorParseError("UNPARSEABLE_DOMINANCE", "no answer block")
    token = m.group(1).strip().upper()
    if token not in ("V", "A"):
        raise SelectorParseError("UNPARSEABLE_DOMINANCE", repr(token))
    return Modality(token)


def parse_modality_vector(raw: str, n: int) -> List[Modality]:
    """JSON ``{"modalities": [...]}`` of length n with tokens in {V, A, VA}.

    Degenerate all-same vectors are legal (the selector prompt only says to
    avoid them); they are accepted with a warning.
    """
    m = _ANSWER_RE.search(raw)
    if not m:
        raise SelectorParseError("INVALID_JSON", "no answer block")
    try:
        payload = json.loads(m.group(1).strip())
    except json.JSONDecodeError as e:
        raise SelectorParseError("INVALID_JSON", str(e)) from e
    if not isinstance(payload, dict) or "modalities" not in payload:
        raise SelectorParseError("INVALID_JSON", "missing modalities key")
    tokens = payload["modalities"]
    if not isinstance(tokens, list) or len(tokens) != n:
        raise SelectorParseError("BAD_LENGTH", f"expected {n} entries")
    vector = []
    for tok in tokens:
        norm = str(tok).strip().upper()
        if norm not in ("V", "A", "VA"):
            raise SelectorParseError("BAD_TOKEN", repr(tok))
        vector.append(Modality(norm))
    if len(set(vector)) == 1:
        log.warning("degenerate modality vector (all %s); accepted", vector[0].value)
    return vector


def _complete_with_retry(client: InferenceClient, messages, parse, attempts: int = 2):
    last_raw = ""
    for _ in range(attempts):
        raw = client.complete(messages)
        last_raw = raw
        try:
            return parse(raw), raw
        except SelectorParseError as e:
            log.warning("selector parse failed (%s); retrying", e)
    raise SelectorParseError("UNPARSEABLE", last_raw[:100])


def decide_dominance(sample: OmniSample, build_config: BuildConfig,
                     infer_config: InferenceConfig,
                     client: InferenceClient) -> Tuple[Modality, str]:
    """Ask the judge for the dominant modality; fall back to V when it cannot answer."""
    frames, audio = build_dominance_context(sample, build_config)
    frames = rescale_to_budget(frames, infer_config.max_pixels, build_config.patch)
    messages = [user_message(get_prompt(SMS_JUDGE), frames=frames,
                             audio=audio, rate=sample.audio_rate_hz)]
    try:
        return _complete_with_retry(client, messages, parse_dominance_answer)
    except (SelectorParseError, TransportError, HttpError) as e:
        log.warning("dominance judge unusable for %s (%s); defaulting to V", sample.id, e)
        return Modality.V, ""


def select_modalities(sample: OmniSample, clips: Sequence[Clip],
                      build_config: BuildConfig, infer_config: InferenceConfig,
                      client: InferenceClient) -> Tuple[List[Modality], str]:
    """Ask the selector for a per-clip V/A/VA vector; fall back to all-VA."""
    n = len(clips)
    prompt = render_rollout_prompt(CMM_SELECTOR, n)
    content_frames = [clip.frames for clip in clips if len(clip.frames)]
    frames = np.concatenate(content_frames) if content_frames else None
    messages = [user_message(prompt, frames=frames)]
    try:
        return _complete_with_retry(client, messages, lambda raw: parse_modality_vector(raw, n))
    except (SelectorParseError, TransportError, HttpError) as e:
        log.warning("modality selector unusable for %s (%s); defaulting to all-VA",
                    sample.id, e)
        return [Modality.VA] * n, ""
