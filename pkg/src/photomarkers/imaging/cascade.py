"""Haar cascade model: JSON loading, validation and packed evaluation arrays."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class CascadeFormatError(ValueError):
    """Raised when a cascade document is malformed; message names the field."""


@dataclass(frozen=True)
class WeakClassifier:
    rects: tuple  # ((x, y, w, h, weight), ...)
    threshold: float
    left: float
    right: float


@dataclass(frozen=True)
class Stage:
    threshold: float
    weak: tuple


@dataclass(frozen=True)
class CascadeModel:
    window_width: int
    window_height: int
    stages: tuple
    _packed: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.stages:
            raise CascadeFormatError("stages: cascade has no stages")
        for si, stage in enumerate(self.stages):
            if not stage.weak:
                raise CascadeFormatError(f"stages[{si}].weak: stage has no weak classifiers")
            for wi, wc in enumerate(stage.weak):
                if not wc.rects:
                    raise CascadeFormatError(f"stages[{si}].weak[{wi}].rects: empty")
                for ri, (x, y, w, h, _) in enumerate(wc.rects):
                    if x < 0 or y < 0 or w <= 0 or h <= 0 or x + w > self.window_width or y + h > self.window_height:
                        raise CascadeFormatError(
                            f"stages[{si}].weak[{wi}].rects[{ri}]: rectangle {(x, y, w, h)} "
                            f"outside the {self.window_width}x{self.window_height} window"
                        )
        object.__setattr__(self, "_packed", _pack(self.stages))

    @property
    def n_weak(self) -> int:
        return sum(len(s.weak) for s in self.stages)

    def flat(self):
        """All weak classifiers as arrays.

        Returns ``(rects, thresholds, left, right, stage_thresholds, bounds)``
        where ``rects`` is (n_weak, 3, 5) with unused slots zero-weighted and
        stage ``k`` owns weak classifiers ``bounds[k]:bounds[k + 1]``.
        """
        return self._packed


def _pack(stages):
    weak = [wc for st in stages for wc in st.weak]
    rects = np.zeros((len(weak), 3, 5), dtype=np.float64)
    for i, wc in enumerate(weak):
        for j, r in enumerate(wc.rects[:3]):
            rects[i, j] = r
    thr = np.array([wc.threshold for wc in weak])
    left = np.array([wc.left for wc in weak])
    right = np.array([wc.right for wc in weak])
    stage_thr = np.array([st.threshold for st in stages])
    bounds = np.cumsum([0] + [len(st.weak) for st in stages]).astype(np.int64)
    for a in (rects, thr, left, right, stage_thr, bounds):
        a.setflags(write=False)
    return rects, thr, left, right, stage_thr, bounds


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CascadeFormatError(f"{where}: expected a number, got {value!r}")
    return value


def _line_of(text: str, needle_index: int) -> int:
    return text.count("\n", 0, needle_index) + 1


def _stage_offsets(text: str) -> list:
    """Character offsets of each element of the top-level "stages" array."""
    dec = json.JSONDecoder()
    try:
        i = text.index("[", text.index('"stages"')) + 1
        offsets = []
        while True:
            while text[i] in " \t\r\n,":
                i += 1
            if text[i] == "]":
                return offsets
            offsets.append(i)
            _, i = dec.raw_decode(text, i)
    except (ValueError, IndexError):
        return []


def parse_cascade(text: str, source: str = "<cascade>") -> CascadeModel:
    """Parse and validate a cascade JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CascadeFormatError(f"{source}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise CascadeFormatError(f"{source}: top level must be an object")
    window = doc.get("window")
    if not (isinstance(window, list) and len(window) == 2 and all(isinstance(v, int) and v > 0 for v in window)):
        raise CascadeFormatError(f"{source}: window: expected [width, height] positive integers")
    raw_stages = doc.get("stages")
    if not isinstance(raw_stages, list) or not raw_stages:
        raise CascadeFormatError(f"{source}: stages: expected a non-empty list")

    offsets = _stage_offsets(text)
    stage_lines = [_line_of(text, o) for o in offsets] if len(offsets) == len(raw_stages) else [None] * len(raw_stages)

    stages = []
    for si, st in enumerate(raw_stages):
        where = f"{source}: stages[{si}]"
        if stage_lines[si] is not None:
            where = f"{source}:{stage_lines[si]}: stages[{si}]"
        if not isinstance(st, dict):
            raise CascadeFormatError(f"{where}: expected an object")
        weak = []
        for wi, wc in enumerate(st.get("weak") or []):
            w_where = f"{where}.weak[{wi}]"
            if not isinstance(wc, dict):
                raise CascadeFormatError(f"{w_where}: expected an object")
            rects = []
            raw_rects = wc.get("rects")
            if not isinstance(raw_rects, list) or not (1 <= len(raw_rects) <= 3):
                raise CascadeFormatError(f"{w_where}.rects: expected 1 to 3 rectangles")
            for ri, r in enumerate(raw_rects):
                if not (isinstance(r, list) and len(r) == 5):
                    raise CascadeFormatError(f"{w_where}.rects[{ri}]: expected [x, y, w, h, weight]")
                x, y, w, h = (_number(v, f"{w_where}.rects[{ri}]") for v in r[:4])
                if any(int(v) != v for v in (x, y, w, h)):
                    raise CascadeFormatError(f"{w_where}.rects[{ri}]: coordinates must be integers")
                if x < 0 or y < 0 or w <= 0 or h <= 0 or x + w > window[0] or y + h > window[1]:
                    raise CascadeFormatError(
                        f"{w_where}.rects[{ri}]: rectangle {(x, y, w, h)} outside the "
                        f"{window[0]}x{window[1]} window"
                    )
                rects.append((int(x), int(y), int(w), int(h), float(_number(r[4], f"{w_where}.rects[{ri}]"))))
            weak.append(WeakClassifier(
                rects=tuple(rects),
                threshold=float(_number(wc.get("threshold"), f"{w_where}.threshold")),
                left=float(_number(wc.get("left"), f"{w_where}.left")),
                right=float(_number(wc.get("right"), f"{w_where}.right")),
            ))
        if not weak:
            raise CascadeFormatError(f"{where}.weak: stage has no weak classifiers")
        stages.append(Stage(threshold=float(_number(st.get("threshold"), f"{where}.threshold")), weak=tuple(weak)))

    try:
        return CascadeModel(window[0], window[1], tuple(stages))
    except CascadeFormatError as exc:
        raise CascadeFormatError(f"{source}: {exc}") from None


def load_cascade(path) -> CascadeModel:
    path = Path(path)
    return parse_cascade(path.read_text(), source=str(path))


_DEFAULT = None


def default_cascade() -> CascadeModel:
    """The bundled 24x24 frontal-face cascade (converted from OpenCV)."""
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("photomarkers").joinpath("data/frontalface_default.json").read_text()
        _DEFAULT = parse_cascade(text, source="frontalface_default.json")
    return _DEFAULT
