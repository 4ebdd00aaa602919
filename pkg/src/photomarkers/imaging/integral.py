"""Luminance planes and summed-area tables."""

from __future__ import annotations

import numpy as np

from .hsv import RgbImage

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def luminance(image: RgbImage) -> np.ndarray:
    """Integer grey levels (0..255) using the Rec. 601 luma weights."""
    px = image.pixels.astype(np.float64)
    y = px[..., 0] * LUMA_WEIGHTS[0] + px[..., 1] * LUMA_WEIGHTS[1] + px[..., 2] * LUMA_WEIGHTS[2]
    return np.clip(np.rint(y), 0, 255).astype(np.int64)


def integral_image(plane) -> np.ndarray:
    """Inclusive summed-area table: ``S[i, j] = plane[:i+1, :j+1].sum()``."""
    a = np.asarray(plane)
    if a.ndim != 2:
        raise ValueError("integral_image expects a 2-D plane")
    acc = np.int64 if np.issubdtype(a.dtype, np.integer) else np.float64
    return a.astype(acc).cumsum(axis=0).cumsum(axis=1)


def padded_integral(plane) -> np.ndarray:
    """Summed-area table with a leading row and column of zeros.

    ``P[y, x]`` is the sum of ``plane[:y, :x]`` so any rectangle needs exactly
    four lookups and no border special cases.
    """
    s = integral_image(plane)
    out = np.zeros((s.shape[0] + 1, s.shape[1] + 1), dtype=s.dtype)
    out[1:, 1:] = s
    return out


def rect_sum(table: np.ndarray, x: int, y: int, w: int, h: int):
    """Sum of the ``w x h`` rectangle at column ``x``, row ``y`` from an inclusive table."""
    if w <= 0 or h <= 0:
        return table.dtype.type(0)
    x1, y1 = x + w - 1, y + h - 1
    total = table[y1, x1]
    if x > 0:
        total = total - table[y1, x - 1]
    if y > 0:
        total = total - table[y - 1, x1]
    if x > 0 and y > 0:
        total = total + table[y - 1, x - 1]
    return total
