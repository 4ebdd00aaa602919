"""Image decoding. Only PNG and baseline JPEG are accepted."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .hsv import RgbImage

SUPPORTED_FORMATS = ("PNG", "JPEG")


class ImageDecodeError(ValueError):
    """The file could not be read or decoded."""


class UnsupportedImageFormat(ImageDecodeError):
    """The file decodes, but not as PNG or JPEG."""


def decode_image(data: bytes, source: str = "<bytes>") -> RgbImage:
    try:
        with Image.open(io.BytesIO(data)) as im:
            fmt = im.format
            if fmt not in SUPPORTED_FORMATS:
                raise UnsupportedImageFormat(f"{source}: unsupported image format {fmt!r}")
            im.load()
            rgb = im.convert("RGB")
    except UnsupportedImageFormat:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"{source}: cannot decode image ({exc})") from None
    return RgbImage(np.asarray(rgb, dtype=np.uint8))


def load_image(path) -> RgbImage:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageDecodeError(f"{path}: {exc.strerror or exc}") from None
    return decode_image(data, source=str(path))
