"""Frame-level image operations: grayscale, bilinear resize, budget rescale.

Conversions are pinned so filter metrics are bit-reproducible: BT.601 luma
weights for grayscale and half-pixel-centered bilinear interpolation for
resizing (the common convention of mainstream image libraries).
"""

from __future__ import annotations

import math

import numpy as np

BT601 = (0.299, 0.587, 0.114)


def to_grayscale(frame: np.ndarray) -> np.ndarray:
    """(H, W, 3) array -> (H, W) float64 luma on the input intensity scale."""
    f = frame.astype(np.float64)
    return BT601[0] * f[..., 0] + BT601[1] * f[..., 1] + BT601[2] * f[..., 2]


def _axis_coords(out_size: int, in_size: int) -> tuple:
    # half-pixel centers: src = (dst + 0.5) * in/out - 0.5, clamped to the edge
    scale = in_size / out_size
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_size - 1.0)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, in_size - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of (H, W) or (H, W, C) to (out_h, out_w[, C]) in float64."""
    if img.ndim == 2:
        img = img[:, :, None]
        squeeze = True
    else:
        squeeze = False
    in_h, in_w = img.shape[:2]
    y_lo, y_hi, y_f = _axis_coords(out_h, in_h)
    x_lo, x_hi, x_f = _axis_coords(out_w, in_w)

    f = img.astype(np.float64)
    top = f[y_lo][:, x_lo] * (1 - x_f)[None, :, None] + f[y_lo][:, x_hi] * x_f[None, :, None]
    bot = f[y_hi][:, x_lo] * (1 - x_f)[None, :, None] + f[y_hi][:, x_hi] * x_f[None, :, None]
    out = top * (1 - y_f)[:, None, None] + bot * y_f[:, None, None]
    return out[:, :, 0] if squeeze else out


def budget_dims(width: int, height: int, pixel_budget: int, patch: int) -> tuple:
    """Target (width, height) under an area budget, snapped down to patch multiples.

    Frames over budget are shrunk by sqrt(budget/area) preserving aspect ratio;
    frames at or under budget are only snapped down (never upscaled).  Both
    dimensions are floored at one patch.
    """
    area = width * height
    if area > pixel_budget:
        scale = math.sqrt(pixel_budget / area)
        w = int(width * scale / patch) * patch
        h = int(height * scale / patch) * patch
    else:
        w = (width // patch) * patch
        h = (height // patch) * patch
    return max(w, patch), max(h, patch)


def rescale_to_budget(frames: np.ndarray, pixel_budget: int, patch: int) -> np.ndarray:
    """Rescale a (T, H, W, 3) stack to the budgeted patch-aligned dimensions."""
    if len(frames) == 0:
        return frames
    h, w = frames.shape[1:3]
    new_w, new_h = budget_dims(w, h, pixel_budget, patch)
    if (new_h, new_w) == (h, w):
        return frames
    out = np.empty((len(frames), new_h, new_w, frames.shape[3]), dtype=frames.dtype)
    for i, frame in enumerate(frames):
        resized = resize_bilinear(frame, new_h, new_w)
        if np.issubdtype(frames.dtype, np.integer):
            resized = np.clip(np.rint(resized), 0, 255)
        out[i] = resized.astype(frames.dtype)
    return out
