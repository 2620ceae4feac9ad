import numpy as np
import pytest

from avjigsaw.fixtures import alternating_spans, moving_gradient, speech_like
from avjigsaw.types import OmniSample


def synth_sample(sample_id: str, duration_s: float, *, fps: float = 4.0,
                 height: int = 72, width: int = 96, seed: int = 0,
                 activity: float = 0.5) -> OmniSample:
    """Dynamic gradient video plus speech-like audio; passes stage 1 by design."""
    rng = np.random.default_rng(seed)
    frames, ts = moving_gradient(duration_s, fps, height, width,
                                 speed_px_s=8.0 + seed % 5)
    audio = speech_like(duration_s, alternating_spans(duration_s, activity), rng)
    return OmniSample(
        id=sample_id, frames=frames, frame_ts=ts, audio=audio,
        audio_rate_hz=16000, duration=duration_s,
        has_video=True, has_audio=True,
    )


@pytest.fixture
def small_sample() -> OmniSample:
    return synth_sample("small", 18.0, seed=3)
