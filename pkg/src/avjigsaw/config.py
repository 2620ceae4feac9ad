"""Configuration objects and the flat config-file loader.

The config file is one flat JSON document whose keys mirror the filter and
build field names below (screening keys carry a ``screen_`` prefix to avoid
colliding with the builder's ``max_frames``).  Unknown keys are errors so a
typo never silently falls back to a default.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .types import AvJigsawError


class ConfigError(AvJigsawError):
    def __init__(self, message: str):
        super().__init__("CONFIG_ERROR", message)


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for the signal-based heuristic filter."""

    d_max_s: float = 200.0
    frame_interval_s: float = 1.0
    mad_threshold: float = 5.0
    max_static_ratio: float = 0.70
    sample_rate_hz: int = 16000
    rms_silence_db: float = -40.0
    max_silence_ratio: float = 0.70
    min_flux_variance: float = 0.5
    vad_bounds: tuple = (0.30, 0.80)

    def __post_init__(self):
        vals = [self.d_max_s, self.frame_interval_s, self.mad_threshold,
                self.max_static_ratio, self.rms_silence_db, self.max_silence_ratio,
                self.min_flux_variance, *self.vad_bounds]
        if not all(abs(v) < float("inf") for v in vals):
            raise ConfigError("all filter thresholds must be finite")
        if not self.vad_bounds[0] < self.vad_bounds[1]:
            raise ConfigError("vad_bounds must satisfy lower < upper")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")


@dataclass(frozen=True)
class BuildConfig:
    """Segmentation, trimming, and downsampling parameters for puzzle building."""

    n_clips: int = 6
    trim_ratio: float = 0.05
    target_fps: float = 2.0
    min_frames: int = 2
    max_frames: int = 12
    pixel_budget: int = 100352
    patch: int = 28
    audio_rate_hz: int = 16000
    judge_fps: float = 1.0
    judge_max_frames: int = 80
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.trim_ratio < 0.5:
            raise ConfigError("trim_ratio must be in [0, 0.5)")
        if self.min_frames > self.max_frames:
            raise ConfigError("min_frames must not exceed max_frames")
        if self.pixel_budget < self.patch * self.patch:
            raise ConfigError("pixel_budget must be at least patch^2")
        if self.n_clips < 2:
            raise ConfigError("n_clips must be >= 2")


@dataclass(frozen=True)
class InferenceConfig:
    """Endpoint and sampling parameters for the semantic assessor."""

    max_frames: int = 200
    max_pixels: int = 100352
    temperature: float = 0.0
    top_p: float = 1.0
    top_k: int = -1              # -1 disables top-k
    repetition_penalty: float = 1.05
    max_new_tokens: int = 2048
    endpoint_url: str = ""
    model_name: str = "assessor"
    timeout_s: float = 60.0
    retries: int = 2
    max_in_flight: int = 4
    rate_limit_per_s: Optional[float] = None

    def __post_init__(self):
        if self.max_new_tokens <= 0:
            raise ConfigError("max_new_tokens must be > 0")
        if self.retries < 0:
            raise ConfigError("retries must be >= 0")


ENDPOINT_URL_ENV = "AVJIGSAW_ENDPOINT_URL"
API_KEY_ENV = "AVJIGSAW_API_KEY"


@dataclass(frozen=True)
class PipelineConfig:
    """Bundle of all stage configs plus pipeline-level knobs."""

    filter: FilterConfig = field(default_factory=FilterConfig)
    build: BuildConfig = field(default_factory=BuildConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    workers: int = 4
    transcoder_path: Optional[str] = None
    # Manifests record a constant timestamp by default so identical runs are
    # byte-identical; disable to record wall-clock times instead.
    fixed_clock: bool = True

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


_SCREEN_PREFIX = "screen_"
_PIPELINE_KEYS = {"workers", "transcoder_path", "fixed_clock"}


def _coerce(dc_field, value):
    if dc_field.name == "vad_bounds":
        if not (isinstance(value, (list, tuple)) and len(value) == 2):
            raise ConfigError("vad_bounds must be a two-element list")
        return (float(value[0]), float(value[1]))
    return value


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Build a PipelineConfig from an optional flat JSON file plus overrides.

    Overrides use the same flat key space as the file and win over it.
    """
    flat: dict = {}
    if path is not None:
        try:
            flat = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        if not isinstance(flat, dict):
            raise ConfigError("config file must hold a flat JSON object")
    if overrides:
        flat = {**flat, **overrides}

    filter_fields = {f.name: f for f in fields(FilterConfig)}
    build_fields = {f.name: f for f in fields(BuildConfig)}
    infer_fields = {f.name: f for f in fields(InferenceConfig)}

    filter_kwargs, build_kwargs, infer_kwargs, pipe_kwargs = {}, {}, {}, {}
    for key, value in flat.items():
        if key.startswith(_SCREEN_PREFIX) and key[len(_SCREEN_PREFIX):] in infer_fields:
            name = key[len(_SCREEN_PREFIX):]
            infer_kwargs[name] = _coerce(infer_fields[name], value)
        elif key in filter_fields:
            filter_kwargs[key] = _coerce(filter_fields[key], value)
        elif key in build_fields:
            build_kwargs[key] = _coerce(build_fields[key], value)
        elif key in _PIPELINE_KEYS:
            pipe_kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key: {key!r}")

    try:
        cfg = PipelineConfig(
            filter=FilterConfig(**filter_kwargs),
            build=BuildConfig(**build_kwargs),
            inference=InferenceConfig(**infer_kwargs),
            **pipe_kwargs,
        )
    except TypeError as e:
        raise ConfigError(str(e)) from e

    if not cfg.inference.endpoint_url and os.environ.get(ENDPOINT_URL_ENV):
        cfg = replace(cfg, inference=replace(cfg.inference, endpoint_url=os.environ[ENDPOINT_URL_ENV]))
    return cfg
