"""Hexcone RGB -> HSV conversion and per-image colour statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RgbImage:
    """An RGB raster stored as a ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (height, width, 3) pixels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("channel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def uniform(cls, width: int, height: int, rgb) -> "RgbImage":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[...] = rgb
        return cls(px)


@dataclass(frozen=True)
class HsvTriple:
    hue: float
    saturation: float
    value: float


def rgb_to_hsv_array(rgb) -> np.ndarray:
    """Convert an array of RGB triples (last axis) in [0, 255] to HSV in [0, 1].

    Hue is measured in turns (degrees / 360) and lies in [0, 1). Achromatic
    pixels (max == min) get hue 0, black pixels get saturation 0.
    """
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn

    chroma = delta > 0
    safe = np.where(chroma, delta, 1.0)
    h = np.where(
        mx == r,
        ((g - b) / safe) / 6.0,
        np.where(mx == g, ((b - r) / safe + 2.0) / 6.0, ((r - g) / safe + 4.0) / 6.0),
    )
    h = np.where(h < 0.0, h + 1.0, h)
    h = np.where(chroma & (h < 1.0), h, 0.0) + 0.0  # + 0.0 folds -0.0 into 0.0
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1)


def rgb_to_hsv(r, g, b) -> HsvTriple:
    h, s, v = rgb_to_hsv_array(np.array([r, g, b], dtype=np.float64))
    return HsvTriple(float(h), float(s), float(v))


def mean_hsv(image: RgbImage) -> tuple[float, float, float]:
    """Mean hue, saturation and brightness over all pixels.

    Hue is averaged linearly as a scalar. Hue is circular, so an image split
    between deep reds near 0 and near 1 averages to a mid-spectrum value;
    this matches how the screening features treat hue as a red-to-blue axis.
    """
    hsv = rgb_to_hsv_array(image.pixels).reshape(-1, 3)
    # shifting by the first pixel keeps constant images exact
    ref = hsv[0]
    out = ref + (hsv - ref).mean(axis=0)
    return float(out[0]), float(out[1]), float(out[2])
