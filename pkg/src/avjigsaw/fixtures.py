"""Deterministic synthetic media corpus for desk-scale testing.

Each fixture targets one filter branch: moving-gradient video passes the
dynamism check, frozen frames fail it; speech-like audio (harmonics plus
low-passed noise under a syllable envelope) passes the acoustic checks at a
controlled activity ratio, while tones, silence, and hiss bursts fail the
flux, silence, and VAD checks respectively.  ``fixture_labels.json`` records
the designed stage-1 outcome of every fixture.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .media import save_sample
from .types import OmniSample, RejectReason, SCHEMA_VERSION

LABELS_NAME = "fixture_labels.json"
RATE = 16000
FIXTURE_SOURCE = "fixtures"


# ---------------------------------------------------------------------------
# video signals

def moving_gradient(duration_s: float, fps: float, height: int, width: int,
                    speed_px_s: float = 8.0, phase: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Horizontal intensity ramp drifting ``speed_px_s`` pixels per second."""
    n = max(2, int(round(duration_s * fps)))
    ts = np.arange(n, dtype=np.float64) / fps
    ramp = np.linspace(0, 255, width, endpoint=False)
    frames = np.empty((n, height, width, 3), np.uint8)
    for i, t in enumerate(ts):
        shift = int(round((phase + speed_px_s * t))) % width
        row = np.roll(ramp, shift)
        frames[i] = np.clip(row, 0, 255).astype(np.uint8)[None, :, None]
    return frames, ts


def frozen_frames(duration_s: float, fps: float, height: int, width: int,
                  rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    n = max(2, int(round(duration_s * fps)))
    ts = np.arange(n, dtype=np.float64) / fps
    frame = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return np.broadcast_to(frame, (n, height, width, 3)).copy(), ts


# ---------------------------------------------------------------------------
# audio signals

def tone(duration_s: float, freq_hz: float = 440.0, amp: float = 0.8) -> np.ndarray:
    t = np.arange(int(round(duration_s * RATE)), dtype=np.float64) / RATE
    return (amp * np.sin(2 * np.pi * freq_hz * t)).astype(np.float32)


def _lowpass_noise(n: int, rng: np.random.Generator, window: int = 9) -> np.ndarray:
    white = rng.standard_normal(n + window)
    smooth = np.convolve(white, np.ones(window) / window, mode="valid")[:n]
    return smooth / max(np.std(smooth), 1e-9)


def speech_like(duration_s: float, active_spans: Sequence[Tuple[float, float]],
                rng: np.random.Generator, hum_amp: float = 0.15) -> np.ndarray:
    """Voiced-band surrogate: harmonic stack plus low-passed noise under a
    3 Hz syllable envelope, with consonant-like plosive bursts at syllable
    starts (they carry the spectral-flux onsets), 60 Hz hum outside the
    active spans."""
    n = int(round(duration_s * RATE))
    t = np.arange(n, dtype=np.float64) / RATE
    harm = (0.5 * np.sin(2 * np.pi * 150 * t)
            + 0.3 * np.sin(2 * np.pi * 300 * t)
            + 0.2 * np.sin(2 * np.pi * 450 * t))
    noise = _lowpass_noise(n, rng)
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * 3.0 * t)
    voice = (0.55 * harm + 0.45 * noise) * envelope * 0.85

    burst = np.zeros(n)
    burst_len = int(0.025 * RATE)
    syllable = 0
    while True:
        i0 = int(round(syllable / 3.0 * RATE))
        if i0 >= n:
            break
        burst[i0: i0 + burst_len] = 0.9 * rng.standard_normal(min(burst_len, n - i0))
        syllable += 1

    mask = np.zeros(n)
    for start, end in active_spans:
        mask[int(round(start * RATE)): int(round(end * RATE))] = 1.0
    hum = hum_amp * np.sin(2 * np.pi * 60.0 * t)
    return np.clip((voice + burst) * mask + hum * (1.0 - mask), -1.0, 1.0).astype(np.float32)


def hiss_bursts(duration_s: float, rng: np.random.Generator,
                period_s: float = 2.0, duty: float = 0.5, amp: float = 0.7) -> np.ndarray:
    """Broadband noise gated on/off; strong onsets, zero-crossing rate above
    the voiced band so the default VAD ignores it."""
    n = int(round(duration_s * RATE))
    t = np.arange(n, dtype=np.float64) / RATE
    gate = ((t % period_s) < duty * period_s).astype(np.float64)
    return np.clip(amp * rng.standard_normal(n) * gate, -1.0, 1.0).astype(np.float32)


def alternating_spans(duration_s: float, active_fraction: float,
                      block_s: float = 1.5) -> List[Tuple[float, float]]:
    """Active spans tiling [0, duration) with the requested duty cycle."""
    spans = []
    t = 0.0
    period = block_s / max(active_fraction, 1e-9)
    while t < duration_s:
        spans.append((t, min(t + block_s, duration_s)))
        t += period
    return spans


# ---------------------------------------------------------------------------
# fixture catalog

@dataclass(frozen=True)
class FixtureLabel:
    fixture_id: str
    file: str
    expected_stage1_pass: bool
    expected_reason: Optional[RejectReason]

    def to_dict(self) -> dict:
        return {
            "fixture_id": self.fixture_id,
            "file": self.file,
            "expected_stage1_pass": self.expected_stage1_pass,
            "expected_reason": self.expected_reason.value if self.expected_reason else None,
        }


def _sample(fixture_id, frames, frame_ts, audio, duration,
            has_video=True, has_audio=True) -> OmniSample:
    return OmniSample(
        id=fixture_id,
        frames=frames if has_video else np.zeros((0, 0, 0, 3), np.uint8),
        frame_ts=frame_ts if has_video else np.zeros(0, np.float64),
        audio=audio if has_audio else np.zeros(0, np.float32),
        audio_rate_hz=RATE,
        duration=duration,
        has_video=has_video,
        has_audio=has_audio,
        source=FIXTURE_SOURCE,
    )


def build_pass_sample(fixture_id: str, duration_s: float, seed: int,
                      activity: float = 0.5) -> OmniSample:
    rng = np.random.default_rng(seed)
    frames, ts = moving_gradient(duration_s, fps=4.0, height=72, width=96,
                                 speed_px_s=8.0 + (seed % 5), phase=seed % 96)
    audio = speech_like(duration_s, alternating_spans(duration_s, activity), rng)
    return _sample(fixture_id, frames, ts, audio, duration_s)


def gen_fixtures(output_dir, seed: int = 0) -> List[FixtureLabel]:
    """Write the 20-fixture corpus (10 designed-pass, 10 designed-reject)."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels: List[FixtureLabel] = []

    def emit(sample: OmniSample, expect_pass: bool, reason: Optional[RejectReason]):
        fname = sample.id + ".npz"
        save_sample(out / fname, sample)
        labels.append(FixtureLabel(sample.id, fname, expect_pass, reason))

    durations = [18.0, 24.0, 30.0, 36.0]
    for i in range(10):
        emit(build_pass_sample(f"pass_{i:02d}", durations[i % 4], seed * 1000 + i),
             True, None)

    rng = np.random.default_rng(seed * 1000 + 100)
    grad24 = moving_gradient(24.0, 4.0, 72, 96)

    # duration over the limit; payload content is irrelevant past the first check
    frames, ts = frozen_frames(220.0, 0.25, 72, 96, rng)
    emit(_sample("reject_too_long", frames, ts, np.zeros(220 * RATE, np.float32), 220.0),
         False, RejectReason.TOO_LONG)

    emit(_sample("reject_no_audio", grad24[0], grad24[1], np.zeros(0, np.float32),
                 24.0, has_audio=False), False, RejectReason.MISSING_STREAM)

    speech24 = speech_like(24.0, alternating_spans(24.0, 0.5), rng)
    emit(_sample("reject_no_video", np.zeros((0, 0, 0, 3), np.uint8),
                 np.zeros(0, np.float64), speech24, 24.0, has_video=False),
         False, RejectReason.MISSING_STREAM)

    frames, ts = frozen_frames(24.0, 4.0, 72, 96, rng)
    emit(_sample("reject_static", frames, ts, speech24, 24.0),
         False, RejectReason.STATIC_VIDEO)

    emit(_sample("reject_silence_zero", grad24[0], grad24[1],
                 np.zeros(24 * RATE, np.float32), 24.0), False, RejectReason.SILENCE)

    # brief tone then noise 80 dB below it: ~90% of frames land under -40 dB
    near = np.concatenate([tone(2.4, 330.0, 0.9),
                           (1e-4 * rng.standard_normal(int(21.6 * RATE))).astype(np.float32)])
    emit(_sample("reject_silence_near", grad24[0], grad24[1], near, 24.0),
         False, RejectReason.SILENCE)

    emit(_sample("reject_low_flux", grad24[0], grad24[1], tone(24.0), 24.0),
         False, RejectReason.LOW_FLUX)

    # strong hiss onsets keep flux high while speech occupies only 10%
    vad_low = hiss_bursts(24.0, rng) * 0.6 + speech_like(
        24.0, [(0.0, 2.4)], rng, hum_amp=0.0) * 0.8
    emit(_sample("reject_vad_low", grad24[0], grad24[1],
                 np.clip(vad_low, -1, 1).astype(np.float32), 24.0),
         False, RejectReason.VAD_OUT_OF_BOUNDS)

    vad_high = speech_like(24.0, [(0.0, 24.0)], rng)
    emit(_sample("reject_vad_high", grad24[0], grad24[1], vad_high, 24.0),
         False, RejectReason.VAD_OUT_OF_BOUNDS)

    (out / "reject_invalid.npz").write_bytes(b"this is not a media archive\x00" * 4)
    labels.append(FixtureLabel("reject_invalid", "reject_invalid.npz",
                               False, RejectReason.INVALID))

    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "fixtures": [lab.to_dict() for lab in labels],
    }
    (out / LABELS_NAME).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return labels


def load_labels(fixture_dir) -> List[FixtureLabel]:
    doc = json.loads((Path(fixture_dir) / LABELS_NAME).read_text(encoding="utf-8"))
    return [FixtureLabel(
        fixture_id=d["fixture_id"],
        file=d["file"],
        expected_stage1_pass=d["expected_stage1_pass"],
        expected_reason=RejectReason(d["expected_reason"]) if d["expected_reason"] else None,
    ) for d in doc["fixtures"]]
