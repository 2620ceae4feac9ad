import numpy as np
import pytest

from avjigsaw import media
from avjigsaw.types import Clip
from conftest import synth_sample


def test_sample_roundtrip(tmp_path, small_sample):
    path = tmp_path / "s.npz"
    media.save_sample(path, small_sample)
    back = media.load_sample(path)
    assert back.id == small_sample.id
    assert back.duration == small_sample.duration
    assert np.array_equal(back.frames, small_sample.frames)
    assert np.array_equal(back.frame_ts, small_sample.frame_ts)
    assert np.array_equal(back.audio, small_sample.audio)
    assert back.audio_rate_hz == small_sample.audio_rate_hz


def test_save_is_byte_deterministic(tmp_path, small_sample):
    a, b = tmp_path / "a.npz", tmp_path / "b.npz"
    media.save_sample(a, small_sample)
    media.save_sample(b, small_sample)
    assert a.read_bytes() == b.read_bytes()


def test_probe_reads_meta_only(tmp_path, small_sample):
    path = tmp_path / "s.npz"
    media.save_sample(path, small_sample)
    meta = media.probe_media(path)
    assert meta.duration_s == small_sample.duration
    assert meta.has_video and meta.has_audio
    assert (meta.width, meta.height) == (96, 72)


def test_probe_missing_file(tmp_path):
    with pytest.raises(media.MediaError) as err:
        media.probe_media(tmp_path / "nope.npz")
    assert err.value.code == "UNREADABLE"


def test_probe_garbage_is_not_media(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"\x00garbage" * 10)
    with pytest.raises(media.MediaError) as err:
        media.probe_media(path)
    assert err.value.code == "NOT_MEDIA"


def test_video_only_probe(tmp_path):
    sample = synth_sample("v", 10.0, seed=1)
    video_only = type(sample)(
        id="v", frames=sample.frames, frame_ts=sample.frame_ts,
        audio=np.zeros(0, np.float32), audio_rate_hz=16000,
        duration=10.0, has_video=True, has_audio=False)
    path = tmp_path / "v.npz"
    media.save_sample(path, video_only)
    meta = media.probe_media(path)
    assert meta.has_video and not meta.has_audio


def test_clip_roundtrip(tmp_path):
    clip = Clip(orig_index=4, frames=np.random.default_rng(0).integers(
        0, 255, (3, 8, 8, 3)).astype(np.uint8),
        frame_ts=np.array([0.0, 0.5, 1.0]), audio=np.linspace(-1, 1, 160).astype(np.float32),
        duration=1.0, video_present=True, audio_present=True)
    path = tmp_path / "clip_01.npz"
    media.save_clip(path, clip)
    back = media.load_clip(path)
    assert back.orig_index == 4
    assert np.array_equal(back.frames, clip.frames)
    assert np.array_equal(back.audio, clip.audio)
    assert back.duration == clip.duration


def test_masked_clip_roundtrip(tmp_path):
    clip = Clip(orig_index=1, frames=np.zeros((0, 0, 0, 3), np.uint8),
                frame_ts=np.zeros(0), audio=np.zeros(320, np.float32),
                duration=1.0, video_present=False, audio_present=True)
    media.save_clip(tmp_path / "c.npz", clip)
    back = media.load_clip(tmp_path / "c.npz")
    assert not back.video_present and len(back.frames) == 0


def test_resample_identity_is_noop():
    audio = np.linspace(-1, 1, 1600).astype(np.float32)
    out = media.resample_audio(audio, 16000, 16000)
    assert out is audio or np.array_equal(out, audio)


def test_resample_halves_length():
    audio = np.sin(2 * np.pi * 440 * np.arange(32000) / 32000).astype(np.float32)
    out = media.resample_audio(audio, 32000, 16000)
    assert len(out) == 16000
