"""Media container I/O.

Native interchange format is an ``.npz`` archive holding decoded arrays
(``frames``, ``frame_ts``, ``audio``) plus a ``meta`` JSON blob, written
through a deterministic zip encoder so identical content yields identical
bytes.  Real container formats (mp4, mkv, ...) are handled by the external
ffmpeg/ffprobe hook when a binary is available; decode always lands in the
same array model, so everything downstream is codec-free.
"""

from __future__ import annotations

import io
import json
import logging
import shutil
import subprocess
import zipfile
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.signal import resample_poly

from .types import AvJigsawError, Clip, MediaMeta, OmniSample, SCHEMA_VERSION

log = logging.getLogger(__name__)

NPZ_SUFFIX = ".npz"
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


class MediaError(AvJigsawError):
    pass


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def write_npz(path, arrays: dict) -> None:
    """Write arrays to an npz with fixed entry order and zeroed zip metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED, compresslevel=6) as zf:
        for name in sorted(arrays):
            info = zipfile.ZipInfo(name + ".npy", date_time=_ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, _npy_bytes(arrays[name]))
    tmp.replace(path)


def _meta_array(meta: dict) -> np.ndarray:
    return np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)


def _read_meta(npz) -> dict:
    if "meta" not in npz:
        raise MediaError("NOT_MEDIA", "archive has no meta entry")
    return json.loads(npz["meta"].tobytes().decode("utf-8"))


def save_sample(path, sample: OmniSample) -> None:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "kind": "sample",
        "id": sample.id,
        "duration_s": float(sample.duration),
        "has_video": bool(sample.has_video),
        "has_audio": bool(sample.has_audio),
        "width": int(sample.frames.shape[2]) if sample.has_video else 0,
        "height": int(sample.frames.shape[1]) if sample.has_video else 0,
        "n_frames": int(len(sample.frames)),
        "audio_rate_hz": int(sample.audio_rate_hz),
        "n_audio_samples": int(len(sample.audio)),
        "source": sample.source,
    }
    write_npz(path, {
        "frames": sample.frames.astype(np.uint8),
        "frame_ts": sample.frame_ts.astype(np.float64),
        "audio": sample.audio.astype(np.float32),
        "meta": _meta_array(meta),
    })


def load_sample(path) -> OmniSample:
    path = Path(path)
    try:
        npz = np.load(path)
        meta = _read_meta(npz)
        frames = np.asarray(npz["frames"])
        frame_ts = np.asarray(npz["frame_ts"])
        audio = np.asarray(npz["audio"])
    except MediaError:
        raise
    except (OSError, ValueError, KeyError, zipfile.BadZipFile) as e:
        raise MediaError("UNREADABLE", f"{path}: {e}") from e
    return OmniSample(
        id=meta["id"],
        frames=frames,
        frame_ts=frame_ts,
        audio=audio,
        audio_rate_hz=meta["audio_rate_hz"],
        duration=meta["duration_s"],
        has_video=meta["has_video"],
        has_audio=meta["has_audio"],
        source_path=str(path),
        source=meta.get("source"),
    )


def save_clip(path, clip: Clip) -> None:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "kind": "clip",
        "orig_index": clip.orig_index,
        "duration_s": float(clip.duration),
        "video_present": bool(clip.video_present),
        "audio_present": bool(clip.audio_present),
        "audio_rate_hz": int(clip.audio_rate_hz),
    }
    write_npz(path, {
        "frames": clip.frames.astype(np.uint8) if len(clip.frames) else np.zeros((0, 0, 0, 3), np.uint8),
        "frame_ts": clip.frame_ts.astype(np.float64),
        "audio": clip.audio.astype(np.float32),
        "meta": _meta_array(meta),
    })


def load_clip(path) -> Clip:
    try:
        npz = np.load(path)
        meta = _read_meta(npz)
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise MediaError("UNREADABLE", f"{path}: {e}") from e
    return Clip(
        orig_index=meta["orig_index"],
        frames=np.asarray(npz["frames"]),
        frame_ts=np.asarray(npz["frame_ts"]),
        audio=np.asarray(npz["audio"]),
        duration=meta["duration_s"],
        video_present=meta["video_present"],
        audio_present=meta["audio_present"],
        audio_rate_hz=meta["audio_rate_hz"],
    )


def resample_audio(audio: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Polyphase resample to rate_out; identity when the rates already match."""
    if rate_in == rate_out or len(audio) == 0:
        return audio.astype(np.float32)
    frac = Fraction(rate_out, rate_in)
    out = resample_poly(audio.astype(np.float64), frac.numerator, frac.denominator)
    return out.astype(np.float32)


# ---------------------------------------------------------------------------
# probing

def probe_media(path, ffprobe_path: Optional[str] = None) -> MediaMeta:
    """Container-level metadata without decoding payload streams.

    Native archives are probed from their meta entry alone; other containers
    go through ffprobe when a binary is available.
    """
    path = Path(path)
    if not path.is_file():
        raise MediaError("UNREADABLE", f"no such file: {path}")
    if path.suffix == NPZ_SUFFIX:
        try:
            npz = np.load(path)
            meta = _read_meta(npz)
        except MediaError:
            raise
        except (OSError, ValueError, zipfile.BadZipFile) as e:
            raise MediaError("NOT_MEDIA", f"{path}: {e}") from e
        return MediaMeta(
            duration_s=meta["duration_s"],
            has_video=meta["has_video"],
            has_audio=meta["has_audio"],
            width=meta.get("width", 0),
            height=meta.get("height", 0),
            source_sample_rate_hz=meta.get("audio_rate_hz", 0),
            source=meta.get("source"),
        )
    return _ffprobe(path, ffprobe_path)


def _ffprobe(path: Path, ffprobe_path: Optional[str]) -> MediaMeta:
    binary = ffprobe_path or shutil.which("ffprobe")
    if binary is None:
        raise MediaError("NOT_MEDIA", f"{path}: no native meta and no ffprobe binary on PATH")
    cmd = [binary, "-v", "error", "-print_format", "json",
           "-show_format", "-show_streams", str(path)]
    try:
        out = subprocess.run(cmd, capture_output=True, timeout=60)
    except (OSError, subprocess.TimeoutExpired) as e:
        raise MediaError("UNREADABLE", f"ffprobe failed on {path}: {e}") from e
    if out.returncode != 0:
        raise MediaError("NOT_MEDIA", f"ffprobe rejected {path}: {out.stderr.decode(errors='replace')[:200]}")
    try:
        info = json.loads(out.stdout)
        streams = info.get("streams", [])
        video = next((s for s in streams if s.get("codec_type") == "video"), None)
        audio = next((s for s in streams if s.get("codec_type") == "audio"), None)
        duration = float(info.get("format", {}).get("duration", 0.0))
    except (ValueError, KeyError) as e:
        raise MediaError("NOT_MEDIA", f"unparseable ffprobe output for {path}") from e
    return MediaMeta(
        duration_s=duration,
        has_video=video is not None,
        has_audio=audio is not None,
        width=int(video.get("width", 0)) if video else 0,
        height=int(video.get("height", 0)) if video else 0,
        source_sample_rate_hz=int(audio.get("sample_rate", 0)) if audio else 0,
    )


# ---------------------------------------------------------------------------
# external decode / transcode hooks

def decode_with_ffmpeg(path, ffmpeg_path: Optional[str] = None,
                       frame_fps: float = 2.0, audio_rate_hz: int = 16000,
                       max_dim: int = 512) -> OmniSample:
    """Decode a real container into the array model via an ffmpeg binary."""
    path = Path(path)
    binary = ffmpeg_path or shutil.which("ffmpeg")
    if binary is None:
        raise MediaError("UNREADABLE", "ffmpeg binary not found; supply ffmpeg_path")
    meta = probe_media(path)
    frames = np.zeros((0, 0, 0, 3), np.uint8)
    frame_ts = np.zeros(0, np.float64)
    if meta.has_video:
        scale = min(1.0, max_dim / max(meta.width, meta.height))
        w, h = max(2, int(meta.width * scale) // 2 * 2), max(2, int(meta.height * scale) // 2 * 2)
        cmd = [binary, "-v", "error", "-i", str(path),
               "-vf", f"fps={frame_fps},scale={w}:{h}",
               "-pix_fmt", "rgb24", "-f", "rawvideo", "-"]
        raw = subprocess.run(cmd, capture_output=True, timeout=600)
        if raw.returncode != 0:
            raise MediaError("UNREADABLE", f"ffmpeg video decode failed: {raw.stderr[:200]}")
        n = len(raw.stdout) // (w * h * 3)
        frames = np.frombuffer(raw.stdout[: n * w * h * 3], np.uint8).reshape(n, h, w, 3)
        frame_ts = np.arange(n, dtype=np.float64) / frame_fps
    audio = np.zeros(0, np.float32)
    if meta.has_audio:
        cmd = [binary, "-v", "error", "-i", str(path), "-vn",
               "-ac", "1", "-ar", str(audio_rate_hz), "-f", "f32le", "-"]
        raw = subprocess.run(cmd, capture_output=True, timeout=600)
        if raw.returncode != 0:
            raise MediaError("UNREADABLE", f"ffmpeg audio decode failed: {raw.stderr[:200]}")
        audio = np.frombuffer(raw.stdout, np.float32)
    return OmniSample(
        id=path.stem,
        frames=frames,
        frame_ts=frame_ts,
        audio=audio,
        audio_rate_hz=audio_rate_hz,
        duration=meta.duration_s,
        has_video=meta.has_video and len(frames) > 0,
        has_audio=meta.has_audio and len(audio) > 0,
        source_path=str(path),
        source=meta.source,
    )


def load_any(path, ffmpeg_path: Optional[str] = None) -> OmniSample:
    """Load a native archive directly or decode another container via ffmpeg."""
    path = Path(path)
    if path.suffix == NPZ_SUFFIX:
        return load_sample(path)
    return decode_with_ffmpeg(path, ffmpeg_path=ffmpeg_path)


_warned_copy_through = False


def standardize(src_path, out_dir, transcoder_path: Optional[str] = None) -> Path:
    """Re-encode a passing sample to mp4/H.264/AAC via the external transcoder.

    Without a transcoder binary this downgrades to copy-through: the source
    path is reused untouched and a warning is emitted once per process.
    """
    global _warned_copy_through
    src_path = Path(src_path)
    binary = transcoder_path or shutil.which("ffmpeg")
    if binary is None or src_path.suffix == NPZ_SUFFIX:
        if binary is None and not _warned_copy_through:
            log.warning("no transcoder binary configured; standardization is copy-through")
            _warned_copy_through = True
        return src_path
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dst = out_dir / (src_path.stem + ".mp4")
    cmd = [binary, "-v", "error", "-y", "-i", str(src_path),
           "-c:v", "libx264", "-c:a", "aac", str(dst)]
    res = subprocess.run(cmd, capture_output=True, timeout=1800)
    if res.returncode != 0:
        raise MediaError("UNREADABLE", f"transcode failed: {res.stderr[:200]}")
    return dst
