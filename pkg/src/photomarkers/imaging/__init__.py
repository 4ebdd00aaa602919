"""Per-photo computational features: HSV statistics and face detection."""

from .accuracy import AccuracyReport, detector_accuracy_report
from .cascade import CascadeFormatError, CascadeModel, default_cascade, load_cascade, parse_cascade
from .detect import DetectionParams, detect_faces
from .features import ExtractionError, ImageFeatures, extract_batch, extract_features
from .hsv import HsvTriple, RgbImage, mean_hsv, rgb_to_hsv, rgb_to_hsv_array
from .integral import integral_image, luminance
from .io import ImageDecodeError, UnsupportedImageFormat, decode_image, load_image

__all__ = [
    "AccuracyReport", "CascadeFormatError", "CascadeModel", "DetectionParams", "ExtractionError",
    "HsvTriple", "ImageDecodeError", "ImageFeatures", "RgbImage", "UnsupportedImageFormat",
    "decode_image", "default_cascade", "detect_faces", "detector_accuracy_report", "extract_batch",
    "extract_features", "integral_image", "load_image", "luminance", "mean_hsv", "parse_cascade",
    "rgb_to_hsv", "rgb_to_hsv_array",
]
