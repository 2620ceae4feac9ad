"""Semantic screening (stage 2): query an assessor endpoint, parse its verdict.

A sample is retained only on a YES decision backed by a coherent reasoning
block; any structural defect in the response fails closed to NO.  Transport
failures defer the sample (it stays eligible for re-screening) instead of
rejecting it, so endpoint flakiness does not skew corpus statistics.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .config import InferenceConfig
from .imageops import rescale_to_budget
from .inference import (HttpError, InferenceClient, TokenBucket, TransportError,
                        user_message)
from .prompts import SCREENING, get_prompt
from .types import OmniSample, ScreeningVerdict, Stage2Report

log = logging.getLogger(__name__)

MIN_COHERENT_CHARS = 20  # reasoning shorter than this is not a usable CoT
_SCREEN_PATCH = 28

_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)


class ScreeningDeferred(Exception):
    """Raised when all transport attempts failed; the sample is not rejected."""


def screening_frames(sample: OmniSample, config: InferenceConfig) -> np.ndarray:
    """Uniformly cap the frame count and rescale each frame to the pixel budget."""
    frames = sample.frames
    if len(frames) > config.max_frames:
        idx = np.linspace(0, len(frames) - 1, config.max_frames).round().astype(int)
        frames = frames[idx]
    return rescale_to_budget(frames, config.max_pixels, _SCREEN_PATCH)


def build_screening_messages(sample: OmniSample, config: InferenceConfig) -> List[dict]:
    return [user_message(get_prompt(SCREENING), frames=screening_frames(sample, config))]


def query_assessor(sample: OmniSample, config: InferenceConfig,
                   client: InferenceClient) -> str:
    """One screening completion; retried ``config.retries`` times on transport failure."""
    messages = build_screening_messages(sample, config)
    last: Optional[Exception] = None
    for attempt in range(config.retries + 1):
        try:
            return client.complete(messages)
        except (TransportError, HttpError) as e:
            last = e
            log.warning("screening attempt %d/%d failed for %s: %s",
                        attempt + 1, config.retries + 1, sample.id, e)
    raise ScreeningDeferred(str(last))


def parse_verdict(raw: str) -> ScreeningVerdict:
    """Extract the CoT and YES/NO decision; anything malformed parses as NO.

    ``coherent`` requires a non-empty reasoning block of at least 20 chars;
    the decision token must be exactly YES or NO (case-insensitive).
    """
    think_match = _THINK_RE.search(raw)
    think_text = think_match.group(1).strip() if think_match else ""
    coherent = len(think_text) >= MIN_COHERENT_CHARS

    answer_match = _ANSWER_RE.search(raw)
    decision = "NO"
    if answer_match:
        token = answer_match.group(1).strip().upper()
        if token in ("YES", "NO"):
            decision = token
    return ScreeningVerdict(think_text=think_text, decision=decision,
                            coherent=coherent, raw=raw)


@dataclass(frozen=True)
class ScreeningOutcome:
    sample_id: str
    report: Optional[Stage2Report]   # None when deferred
    deferred: bool
    raw: str = ""

    @property
    def retained(self) -> bool:
        return self.report is not None and self.report.passed


def screen_sample(sample: OmniSample, config: InferenceConfig,
                  client: InferenceClient) -> ScreeningOutcome:
    try:
        raw = query_assessor(sample, config, client)
    except ScreeningDeferred as e:
        log.info("screening deferred for %s: %s", sample.id, e)
        return ScreeningOutcome(sample_id=sample.id, report=None, deferred=True)
    verdict = parse_verdict(raw)
    report = Stage2Report(think_text=verdict.think_text, decision=verdict.decision,
                          coherent=verdict.coherent, passed=verdict.retained)
    return ScreeningOutcome(sample_id=sample.id, report=report, deferred=False, raw=raw)


def run_stage2(samples: Sequence[OmniSample], config: InferenceConfig,
               client: InferenceClient) -> List[ScreeningOutcome]:
    """Screen stage-1 survivors concurrently; order of results matches input order."""
    bucket = TokenBucket(config.rate_limit_per_s)

    def job(sample: OmniSample) -> ScreeningOutcome:
        bucket.acquire()
        return screen_sample(sample, config, client)

    if len(samples) <= 1 or config.max_in_flight <= 1:
        return [job(s) for s in samples]
    with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
        return list(pool.map(job, samples))
