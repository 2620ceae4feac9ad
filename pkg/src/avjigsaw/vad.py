"""Speech activity detection.

The filter only needs ``segments(audio, rate) -> [(start_s, end_s), ...]``,
so any detector (including a neural one) plugs in behind that interface.
The default is an energy + zero-crossing heuristic that runs without model
downloads: a frame counts as speech when it is loud relative to the clip's
loudest frame and its zero-crossing rate sits in the voiced band.
"""

from __future__ import annotations

from typing import List, Protocol, Tuple

import numpy as np

from .types import AvJigsawError


class VadError(AvJigsawError):
    def __init__(self, message: str):
        super().__init__("VAD_ERROR", message)


class SpeechActivityDetector(Protocol):
    def segments(self, audio: np.ndarray, rate: int) -> List[Tuple[float, float]]:
        """Detected speech spans as (start_s, end_s) pairs, non-overlapping, sorted."""
        ...


class EnergyZcrDetector:
    """Frame-wise heuristic: relative RMS gate plus a zero-crossing band.

    zcr is crossings per sample; pure tones at f Hz land near 2f/rate, so the
    default band keeps roughly 160 Hz - 2.8 kHz content at 16 kHz and drops
    low rumble and broadband hiss.
    """

    def __init__(self, frame_s: float = 0.03, rel_energy: float = 0.1,
                 zcr_band: Tuple[float, float] = (0.02, 0.35)):
        self.frame_s = frame_s
        self.rel_energy = rel_energy
        self.zcr_band = zcr_band

    def segments(self, audio: np.ndarray, rate: int) -> List[Tuple[float, float]]:
        if len(audio) == 0:
            return []
        frame_len = max(1, int(round(self.frame_s * rate)))
        n_frames = len(audio) // frame_len
        if n_frames == 0:
            frames = audio[None, :].astype(np.float64)
            frame_len = len(audio)
            n_frames = 1
        else:
            frames = audio[: n_frames * frame_len].astype(np.float64).reshape(n_frames, frame_len)

        rms = np.sqrt(np.mean(frames ** 2, axis=1))
        peak = rms.max()
        if peak <= 0:
            return []
        signs = np.signbit(frames)
        crossings = np.sum(signs[:, 1:] != signs[:, :-1], axis=1)
        zcr = crossings / max(frame_len - 1, 1)

        active = (rms > self.rel_energy * peak) & (zcr >= self.zcr_band[0]) & (zcr <= self.zcr_band[1])
        spans: List[Tuple[float, float]] = []
        start = None
        for i, flag in enumerate(active):
            if flag and start is None:
                start = i
            elif not flag and start is not None:
                spans.append((start * frame_len / rate, i * frame_len / rate))
                start = None
        if start is not None:
            spans.append((start * frame_len / rate, n_frames * frame_len / rate))
        return spans
