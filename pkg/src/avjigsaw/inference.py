"""Pluggable inference endpoint client.

Requests use the OpenAI-compatible chat-completion JSON shape: one user
message whose content interleaves text and media parts (base64 PNG frames,
base64 WAV audio).  ``mock://`` URLs resolve to a canned in-process client
so the pipeline runs offline; anything else goes over HTTP.
"""

from __future__ import annotations

import base64
import io
import json
import os
import struct
import threading
import time
import wave
import zlib
from typing import List, Optional, Protocol

import numpy as np
import requests

from .config import API_KEY_ENV, InferenceConfig
from .types import AvJigsawError


class TransportError(AvJigsawError):
    """Endpoint unreachable or timed out; the sample should be deferred."""

    def __init__(self, message: str):
        super().__init__("ENDPOINT_UNREACHABLE", message)


class HttpError(AvJigsawError):
    def __init__(self, status: int, message: str):
        self.status = status
        super().__init__("HTTP_ERROR", f"{status}: {message}")


class InferenceClient(Protocol):
    def complete(self, messages: List[dict]) -> str:
        """Return the completion text for one chat request."""
        ...


# ---------------------------------------------------------------------------
# payload encoding

def _png_bytes(frame: np.ndarray) -> bytes:
    """Minimal RGB PNG encoder (keeps the client dependency-free)."""
    h, w = frame.shape[:2]
    raw = b"".join(b"\x00" + frame[y].astype(np.uint8).tobytes() for y in range(h))

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (struct.pack(">I", len(data)) + tag + data
                + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", zlib.compress(raw, 6)) + chunk(b"IEND", b""))


def frame_part(frame: np.ndarray) -> dict:
    b64 = base64.b64encode(_png_bytes(frame)).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}}


def audio_part(audio: np.ndarray, rate: int) -> dict:
    pcm = np.clip(audio, -1.0, 1.0)
    pcm16 = (pcm * 32767.0).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(pcm16.tobytes())
    b64 = base64.b64encode(buf.getvalue()).decode("ascii")
    return {"type": "input_audio", "input_audio": {"data": b64, "format": "wav"}}


def user_message(text: str, frames: Optional[np.ndarray] = None,
                 audio: Optional[np.ndarray] = None, rate: int = 16000) -> dict:
    content: List[dict] = [{"type": "text", "text": text}]
    if frames is not None:
        content.extend(frame_part(f) for f in frames)
    if audio is not None and len(audio):
        content.append(audio_part(audio, rate))
    return {"role": "user", "content": content}


def message_text(messages: List[dict]) -> str:
    """Concatenated text parts of a request (used for audit logs and mocks)."""
    parts = []
    for msg in messages:
        content = msg.get("content", "")
        if isinstance(content, str):
            parts.append(content)
        else:
            parts.extend(p.get("text", "") for p in content if p.get("type") == "text")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# rate limiting

class TokenBucket:
    """Blocking token bucket; None rate disables limiting."""

    def __init__(self, rate_per_s: Optional[float]):
        self.rate = rate_per_s
        self._lock = threading.Lock()
        self._next_free = 0.0

    def acquire(self) -> None:
        if not self.rate:
            return
        with self._lock:
            now = time.monotonic()
            wait = max(0.0, self._next_free - now)
            self._next_free = max(now, self._next_free) + 1.0 / self.rate
        if wait > 0:
            time.sleep(wait)


# ---------------------------------------------------------------------------
# clients

class HttpInferenceClient:
    """OpenAI-compatible chat-completions client over HTTP."""

    def __init__(self, config: InferenceConfig, api_key: Optional[str] = None):
        self.config = config
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self._session = requests.Session()

    def complete(self, messages: List[dict]) -> str:
        cfg = self.config
        body = {
            "model": cfg.model_name,
            "messages": messages,
            "temperature": cfg.temperature,
            "top_p": cfg.top_p,
            "max_tokens": cfg.max_new_tokens,
            "repetition_penalty": cfg.repetition_penalty,
        }
        if cfg.top_k is not None and cfg.top_k >= 0:
            body["top_k"] = cfg.top_k
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = cfg.endpoint_url.rstrip("/") + "/chat/completions"
        try:
            resp = self._session.post(url, json=body, headers=headers, timeout=cfg.timeout_s)
        except requests.Timeout as e:
            raise TransportError(f"timeout after {cfg.timeout_s}s") from e
        except requests.RequestException as e:
            raise TransportError(str(e)) from e
        if resp.status_code != 200:
            raise HttpError(resp.status_code, resp.text[:200])
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as e:
            raise HttpError(resp.status_code, f"malformed completion body: {e}") from e


class MockInferenceClient:
    """Canned completions for offline runs and tests.

    Modes: ``pass`` answers YES / V / a mixed modality vector, ``reject``
    answers NO to screening, ``defer`` always raises a transport error.
    The request's text part decides which canned answer applies.
    """

    def __init__(self, mode: str = "pass"):
        if mode not in ("pass", "reject", "defer"):
            raise AvJigsawError("BAD_MOCK_MODE", mode)
        self.mode = mode
        self.calls = 0

    def complete(self, messages: List[dict]) -> str:
        self.calls += 1
        if self.mode == "defer":
            raise TransportError("mock endpoint is down")
        text = message_text(messages)
        if "expert video analyst" in text:
            if self.mode == "reject":
                return ("<think>The clips could be rearranged without losing meaning; "
                        "no irreversible progression is visible.</think><answer>NO</answer>")
            return ("<think>Clear causal progression with distinct visual states "
                    "across the sampled frames.</think><answer>YES</answer>")
        if "Multimodal Content Analyst" in text:
            return "<thinking>Visual evolution gives the stricter timeline.</thinking><answer>V</answer>"
        if "Multimodal Jigsaw Puzzle Expert" in text:
            n = text.count("Clip ")
            cycle = ["V", "A", "VA"]
            vector = [cycle[i % 3] for i in range(max(n, 1))]
            return ("<thinking>Alternating salience across clips.</thinking>"
                    f"<answer>{json.dumps({'modalities': vector})}</answer>")
        n = text.count("Clip ")
        answer = ", ".join(str(i) for i in range(1, max(n, 2) + 1))
        return f"<thinking>mock rollout</thinking><answer>{answer}</answer>"


def make_client(config: InferenceConfig) -> InferenceClient:
    url = config.endpoint_url
    if url.startswith("mock://"):
        return MockInferenceClient(url[len("mock://"):] or "pass")
    if not url:
        raise AvJigsawError("NO_ENDPOINT", "endpoint_url is empty; set --endpoint-url or "
                                           "the AVJIGSAW_ENDPOINT_URL env var")
    return HttpInferenceClient(config)
