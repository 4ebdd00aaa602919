"""Per-photo feature records: mean HSV plus face presence and count."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

from .cascade import CascadeModel
from .detect import DetectionParams, detect_faces
from .hsv import RgbImage, mean_hsv
from .io import ImageDecodeError, load_image


@dataclass(frozen=True)
class ImageFeatures:
    mean_hue: float
    mean_saturation: float
    mean_brightness: float
    face_count: int
    has_face: bool

    def __post_init__(self):
        if self.face_count < 0:
            raise ValueError("face_count must be >= 0")
        if self.has_face != (self.face_count >= 1):
            raise ValueError("has_face must equal face_count >= 1")
        for name in ("mean_hue", "mean_saturation", "mean_brightness"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ImageFeatures":
        count = int(d["face_count"])
        return cls(float(d["mean_hue"]), float(d["mean_saturation"]), float(d["mean_brightness"]),
                   count, bool(d.get("has_face", count >= 1)))


@dataclass(frozen=True)
class ExtractionError:
    key: str
    kind: str
    message: str

    def to_dict(self) -> dict:
        return asdict(self)


def extract_features(image: RgbImage, cascade: CascadeModel,
                     params: DetectionParams = DetectionParams()) -> ImageFeatures:
    h, s, v = mean_hsv(image)
    n = len(detect_faces(image, cascade, params))
    # clip guards against 1-ulp drift in the shifted mean
    clip = lambda x: min(max(x, 0.0), 1.0)  # noqa: E731
    return ImageFeatures(clip(h), clip(s), clip(v), n, n >= 1)


def extract_batch(items: Iterable, cascade: CascadeModel, params: DetectionParams = DetectionParams()):
    """Extract features for ``(key, path)`` pairs without letting one bad file stop the batch.

    Returns ``(features, errors)`` where ``features`` maps key to
    :class:`ImageFeatures` and ``errors`` lists one :class:`ExtractionError`
    per photo that could not be decoded.
    """
    features, errors = {}, []
    for key, path in items:
        try:
            img = load_image(path)
        except ImageDecodeError as exc:
            errors.append(ExtractionError(str(key), type(exc).__name__, str(exc)))
            continue
        features[key] = extract_features(img, cascade, params)
    return features, errors
