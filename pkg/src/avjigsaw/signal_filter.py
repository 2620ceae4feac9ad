"""Signal-based heuristic filtering (stage 1).

Checks run in a fixed order with short-circuiting: duration -> stream
integrity -> visual dynamism (MAD) -> silence ratio (RMS dB) -> spectral
flux variance -> speech ratio (VAD).  The first failed check names the
reject reason and later metrics stay unrecorded.

All audio metrics share one analysis framing (2048-sample windows, 512-hop
at 16 kHz) so reports are bit-reproducible for identical input bytes.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from .config import FilterConfig
from .imageops import resize_bilinear, to_grayscale
from .media import resample_audio
from .types import FilterReport, OmniSample, RejectReason, Stage1Report
from .vad import SpeechActivityDetector

log = logging.getLogger(__name__)

ANALYSIS_WINDOW = 2048
ANALYSIS_HOP = 512
DB_EPS = 1e-10          # floor inside the dB log so digital silence stays finite
MAD_SIDE = 64           # thumbnails are MAD_SIDE x MAD_SIDE grayscale


def sample_frames_at_interval(frames: np.ndarray, frame_ts: np.ndarray,
                              interval_s: float, duration_s: float) -> np.ndarray:
    """Pick the nearest stored frame for each grid time 0, dt, 2dt, ... < duration.

    Consecutive duplicates (sparser source than the grid) are collapsed so the
    static metric measures real frame-to-frame change.
    """
    if len(frames) == 0:
        return frames
    targets = np.arange(0.0, duration_s, interval_s)
    if len(targets) == 0:
        targets = np.array([0.0])
    idx = np.abs(frame_ts[None, :] - targets[:, None]).argmin(axis=1)
    keep = np.concatenate([[True], np.diff(idx) != 0])
    return frames[idx[keep]]


def static_ratio(frames: np.ndarray, mad_threshold: float) -> float:
    """Fraction of adjacent-frame transitions whose MAD falls below threshold.

    MAD is the mean absolute per-pixel difference between consecutive frames
    after resizing to 64x64 and grayscale conversion, on the 0-255 scale.
    Fewer than two frames counts as fully static (ratio 1.0).
    """
    if len(frames) < 2:
        return 1.0
    thumbs = np.stack([to_grayscale(resize_bilinear(f, MAD_SIDE, MAD_SIDE)) for f in frames])
    mads = np.mean(np.abs(np.diff(thumbs, axis=0)), axis=(1, 2))
    return float(np.count_nonzero(mads < mad_threshold) / len(mads))


def _frame_signal(audio: np.ndarray, window: int = ANALYSIS_WINDOW,
                  hop: int = ANALYSIS_HOP) -> np.ndarray:
    """(n_frames, window) view of complete analysis windows; short input is one frame."""
    x = np.asarray(audio, dtype=np.float64)
    if len(x) < window:
        return x[None, :]
    n_frames = (len(x) - window) // hop + 1
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def silence_ratio(audio: np.ndarray, rms_silence_db: float) -> float:
    """Fraction of analysis frames below a dB threshold relative to the loudest frame.

    Empty or all-zero audio is fully silent (ratio 1.0); the epsilon floor in
    the logarithm keeps the zero-signal case finite rather than NaN.
    """
    if len(audio) == 0:
        return 1.0
    frames = _frame_signal(audio)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    peak = rms.max()
    if peak <= 0:
        return 1.0
    db = 20.0 * np.log10(np.maximum(rms / peak, DB_EPS))
    return float(np.count_nonzero(db < rms_silence_db) / len(db))


def onset_strength(audio: np.ndarray) -> np.ndarray:
    """Per-frame mean over frequency bins of half-wave-rectified spectral increase."""
    frames = _frame_signal(audio)
    if frames.shape[1] < ANALYSIS_WINDOW:
        frames = np.pad(frames, ((0, 0), (0, ANALYSIS_WINDOW - frames.shape[1])))
    window = np.hanning(ANALYSIS_WINDOW)
    spectra = np.abs(np.fft.rfft(frames * window, axis=1))
    if len(spectra) < 2:
        return np.zeros(0)
    rise = np.maximum(spectra[1:] - spectra[:-1], 0.0)
    return rise.mean(axis=1)


def flux_variance(audio: np.ndarray) -> float:
    """Variance of the onset-strength envelope; 0.0 for empty or too-short audio."""
    if len(audio) == 0:
        return 0.0
    env = onset_strength(audio)
    if len(env) == 0:
        return 0.0
    return float(np.var(env))


def speech_ratio(audio: np.ndarray, rate: int, detector: SpeechActivityDetector,
                 total_duration_s: Optional[float] = None) -> float:
    """Total detected speech time divided by the sample duration."""
    duration = total_duration_s if total_duration_s is not None else len(audio) / rate
    if duration <= 0:
        return 0.0
    spans = detector.segments(audio, rate)
    covered = sum(max(0.0, end - start) for start, end in spans)
    return float(min(1.0, covered / duration))


def run_stage1(sample: OmniSample, config: FilterConfig,
               detector: SpeechActivityDetector) -> FilterReport:
    """Apply all stage-1 checks to one sample, short-circuiting on first failure."""
    duration_ok = sample.duration <= config.d_max_s
    streams_ok = sample.has_video and sample.has_audio

    def rejected(reason: RejectReason, **metrics) -> FilterReport:
        return FilterReport(sample_id=sample.id, stage1=Stage1Report(
            duration_ok=duration_ok, streams_ok=streams_ok,
            passed=False, reject_reason=reason, **metrics))

    if not duration_ok:
        return rejected(RejectReason.TOO_LONG)
    if not streams_ok:
        return rejected(RejectReason.MISSING_STREAM)

    sampled = sample_frames_at_interval(sample.frames, sample.frame_ts,
                                        config.frame_interval_s, sample.duration)
    s_ratio = static_ratio(sampled, config.mad_threshold)
    if s_ratio > config.max_static_ratio:
        return rejected(RejectReason.STATIC_VIDEO, static_ratio=s_ratio)

    audio = resample_audio(sample.audio, sample.audio_rate_hz, config.sample_rate_hz)
    sil_ratio = silence_ratio(audio, config.rms_silence_db)
    if sil_ratio > config.max_silence_ratio:
        return rejected(RejectReason.SILENCE, static_ratio=s_ratio, silence_ratio=sil_ratio)

    flux_var = flux_variance(audio)
    if flux_var < config.min_flux_variance:
        return rejected(RejectReason.LOW_FLUX, static_ratio=s_ratio,
                        silence_ratio=sil_ratio, flux_variance=flux_var)

    try:
        sp_ratio = speech_ratio(audio, config.sample_rate_hz, detector,
                                total_duration_s=sample.duration)
    except Exception as e:  # detector failures reject, never crash the corpus
        log.warning("VAD failed on %s: %s", sample.id, e)
        return rejected(RejectReason.VAD_ERROR, static_ratio=s_ratio,
                        silence_ratio=sil_ratio, flux_variance=flux_var)
    lo, hi = config.vad_bounds
    if not lo <= sp_ratio <= hi:
        return rejected(RejectReason.VAD_OUT_OF_BOUNDS, static_ratio=s_ratio,
                        silence_ratio=sil_ratio, flux_variance=flux_var,
                        speech_ratio=sp_ratio)

    return FilterReport(sample_id=sample.id, stage1=Stage1Report(
        duration_ok=True, streams_ok=True,
        static_ratio=s_ratio, silence_ratio=sil_ratio,
        flux_variance=flux_var, speech_ratio=sp_ratio, passed=True))
