"""Immutable prompt template assets and their binding to puzzle strategies.

The ``assets/`` texts are the canonical templates; ``get_prompt`` returns
them byte-for-byte.  Templates are written for the default 6-clip puzzle;
``render_rollout_prompt`` leaves them untouched at n=6 and rewrites the clip
count, clip lines, and answer example for other sizes.
"""

from __future__ import annotations

import re
from importlib import resources

from ..types import AvJigsawError, Modality, Strategy

SCREENING = "screening"
JMI_ROLLOUT = "jmi_rollout"
SMS_JUDGE = "sms_judge"
VIDEO_ROLLOUT = "video_rollout"
AUDIO_ROLLOUT = "audio_rollout"
CMM_SELECTOR = "cmm_selector"
CMM_ROLLOUT = "cmm_rollout"

PROMPT_IDS = (SCREENING, JMI_ROLLOUT, SMS_JUDGE, VIDEO_ROLLOUT,
              AUDIO_ROLLOUT, CMM_SELECTOR, CMM_ROLLOUT)

_TEMPLATE_N = 6
_cache: dict = {}


def get_prompt(prompt_id: str) -> str:
    """Return the stored template text, byte-identical to the asset file."""
    if prompt_id not in PROMPT_IDS:
        raise AvJigsawError("UNKNOWN_PROMPT", prompt_id)
    if prompt_id not in _cache:
        ref = resources.files(__package__) / "assets" / f"{prompt_id}.txt"
        _cache[prompt_id] = ref.read_text(encoding="utf-8")
    return _cache[prompt_id]


def rollout_prompt_id(strategy: Strategy, dominance=None) -> str:
    """Prompt variant bound into a puzzle of the given strategy."""
    if strategy is Strategy.JMI:
        return JMI_ROLLOUT
    if strategy is Strategy.CMM:
        return CMM_ROLLOUT
    if strategy is Strategy.VIDEO:
        return VIDEO_ROLLOUT
    if strategy is Strategy.AUDIO:
        return AUDIO_ROLLOUT
    if strategy is Strategy.SMS:
        if dominance is None:
            raise AvJigsawError("MISSING_DOMINANCE", "SMS prompt binding needs a dominance verdict")
        return VIDEO_ROLLOUT if dominance is Modality.V else AUDIO_ROLLOUT
    raise AvJigsawError("UNKNOWN_PROMPT", str(strategy))


_MULTILINE_CLIPS = re.compile(r"Clip 1: <(video|audio)>(?:\n\nClip \d+: <\1>)+")
_INLINE_CLIPS = re.compile(r"Clip 1: <video>(?: Clip \d+: <video>)+")
_COUNT_PHRASES = ("You are given 6 ", "into 6 equal-length", "based on 6 sequential")
_EXAMPLE_ANSWER = "2, 3, 1, 4, 6, 5"


def _example_answer(n: int) -> str:
    return ", ".join(str(i) for i in list(range(2, n + 1)) + [1])


def render_rollout_prompt(prompt_id: str, n_clips: int) -> str:
    """Instantiate a rollout/selector template for an n-clip puzzle."""
    text = get_prompt(prompt_id)
    if n_clips == _TEMPLATE_N:
        return text
    if n_clips < 2:
        raise AvJigsawError("N_TOO_SMALL", "prompts need at least 2 clips")

    def multi_sub(m):
        tag = m.group(1)
        return "\n\n".join(f"Clip {i}: <{tag}>" for i in range(1, n_clips + 1))

    def inline_sub(_):
        return " ".join(f"Clip {i}: <video>" for i in range(1, n_clips + 1))

    text = _MULTILINE_CLIPS.sub(multi_sub, text)
    text = _INLINE_CLIPS.sub(inline_sub, text)
    for phrase in _COUNT_PHRASES:
        text = text.replace(phrase, phrase.replace("6", str(n_clips)))
    return text.replace(_EXAMPLE_ANSWER, _example_answer(n_clips))
