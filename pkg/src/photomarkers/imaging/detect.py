"""Two-pass Viola-Jones style face detection over a scaled-window pyramid.

Each pass slides a detection window that grows by its scale factor per
level. Every window runs through the cascade stages in order and stops at
the first stage it fails, so most of the image costs only a handful of
feature evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .cascade import CascadeModel
from .hsv import RgbImage
from .integral import luminance, padded_integral

GROUP_IOU = 0.3
MIN_WINDOW_STD = 1.0


@dataclass(frozen=True)
class DetectionParams:
    scale_factors: tuple = (1.05, 1.4)
    min_neighbors: int = 4
    min_size: tuple = (20, 20)

    def __post_init__(self):
        object.__setattr__(self, "scale_factors", tuple(float(s) for s in self.scale_factors))
        object.__setattr__(self, "min_size", tuple(int(v) for v in self.min_size))
        if not self.scale_factors or any(s <= 1.0 for s in self.scale_factors):
            raise ValueError("scale factors must all be > 1")
        if self.min_neighbors < 0:
            raise ValueError("min_neighbors must be >= 0")
        if len(self.min_size) != 2 or min(self.min_size) < 1:
            raise ValueError("min_size must be two positive integers")


def _round(v: float) -> int:
    return int(math.floor(v + 0.5))


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise intersection-over-union of (x, y, w, h) boxes."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ax2, ay2 = a[:, 0] + a[:, 2], a[:, 1] + a[:, 3]
    bx2, by2 = b[:, 0] + b[:, 2], b[:, 1] + b[:, 3]
    iw = np.clip(np.minimum(ax2[:, None], bx2[None]) - np.maximum(a[:, None, 0], b[None, :, 0]), 0, None)
    ih = np.clip(np.minimum(ay2[:, None], by2[None]) - np.maximum(a[:, None, 1], b[None, :, 1]), 0, None)
    inter = iw * ih
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None] - inter
    return inter / union


def _clusters(boxes: np.ndarray, threshold: float) -> np.ndarray:
    n = len(boxes)
    rows, cols = [], []
    chunk = 1024
    for start in range(0, n, chunk):
        m = iou_matrix(boxes[start:start + chunk], boxes) >= threshold
        r, c = np.nonzero(m)
        rows.append(r + start)
        cols.append(c)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    graph = coo_matrix((np.ones(len(r), dtype=np.int8), (r, c)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def group_boxes(boxes, min_members: int, threshold: float = GROUP_IOU):
    """Cluster boxes whose IoU reaches ``threshold`` (transitively).

    Returns ``(mean_box, member_count)`` for every cluster with at least
    ``min_members`` members, ordered by the cluster's first member.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if len(boxes) == 0:
        return []
    labels = _clusters(boxes, threshold)
    out = []
    for lab in np.unique(labels):
        members = boxes[labels == lab]
        if len(members) < min_members:
            continue
        mean = members.mean(axis=0)
        out.append((tuple(_round(v) for v in mean), len(members)))
    return out


class _ScaledCascade:
    """Cascade rectangles scaled to one pyramid level, flattened across stages."""

    def __init__(self, cascade: CascadeModel, scale: float, row_stride: int):
        ww, wh = cascade.window_width, cascade.window_height
        self.win_w = _round(ww * scale)
        self.win_h = _round(wh * scale)
        # variance and feature normalisation use the window minus a one-pixel border
        ex = ey = _round(scale)
        ew, eh = _round((ww - 2) * scale), _round((wh - 2) * scale)
        self.norm_area = float(ew * eh)
        self.norm_corners = _corners(np.array([ex]), np.array([ey]), np.array([ew]), np.array([eh]), row_stride)[0]

        rects, thr, left, right, stage_thr, bounds = cascade.flat()
        x = np.floor(rects[..., 0] * scale + 0.5)
        y = np.floor(rects[..., 1] * scale + 0.5)
        w = np.floor(rects[..., 2] * scale + 0.5)
        h = np.floor(rects[..., 3] * scale + 0.5)
        w = np.maximum(np.minimum(w, self.win_w - x), 1)
        h = np.maximum(np.minimum(h, self.win_h - y), 1)
        weight = rects[..., 4].copy()
        used = weight != 0
        area = w * h
        # keep each feature zero-sum after rounding by re-deriving the first weight
        rest = np.where(used[:, 1:], weight[:, 1:] * area[:, 1:], 0.0).sum(axis=1)
        weight[:, 0] = -rest / area[:, 0]
        self.weight = np.where(used, weight, 0.0)
        self.corners = _corners(x, y, w, h, row_stride)
        self.n_rects = used.sum(axis=1).astype(np.int64)
        self.thr, self.left, self.right = thr, left, right
        self.stage_thr, self.bounds = stage_thr, bounds


def _corners(x, y, w, h, row_stride):
    """Flat offsets of the four summed-area corners of each rectangle, (..., 4)."""
    return np.stack([
        (y + h) * row_stride + x + w,
        y * row_stride + x + w,
        (y + h) * row_stride + x,
        y * row_stride + x,
    ], axis=-1).astype(np.int64)


@njit(cache=True)
def _scan_level(sat, sq, ny, nx, step, row_stride, norm_corners, norm_area, corners, weight, n_rects,
                thr, left, right, stage_thr, bounds, min_std):
    accepted = np.zeros((ny, nx), dtype=np.bool_)
    n0, n1, n2, n3 = norm_corners[0], norm_corners[1], norm_corners[2], norm_corners[3]
    for iy in range(ny):
        for ix in range(nx):
            b = iy * step * row_stride + ix * step
            s = float(sat[b + n0] - sat[b + n1] - sat[b + n2] + sat[b + n3])
            s2 = float(sq[b + n0] - sq[b + n1] - sq[b + n2] + sq[b + n3])
            mean = s / norm_area
            var = s2 / norm_area - mean * mean
            std = np.sqrt(var) if var > 0.0 else 0.0
            if std < min_std:
                continue
            scale = std * norm_area
            ok = True
            for k in range(len(stage_thr)):
                total = 0.0
                for j in range(bounds[k], bounds[k + 1]):
                    feat = 0.0
                    for r in range(n_rects[j]):
                        c0 = b + corners[j, r, 0]
                        c1 = b + corners[j, r, 1]
                        c2 = b + corners[j, r, 2]
                        c3 = b + corners[j, r, 3]
                        feat += weight[j, r] * float(sat[c0] - sat[c1] - sat[c2] + sat[c3])
                    total += left[j] if feat < thr[j] * scale else right[j]
                if total < stage_thr[k]:
                    ok = False
                    break
            accepted[iy, ix] = ok
    return accepted


def _evaluate_level(sc: _ScaledCascade, sat: np.ndarray, sq: np.ndarray, width: int, height: int,
                    step: int) -> np.ndarray:
    if width < sc.win_w or height < sc.win_h:
        return np.empty((0, 2), dtype=np.int64)
    ny = (height - sc.win_h) // step + 1
    nx = (width - sc.win_w) // step + 1
    accepted = _scan_level(sat.ravel(), sq.ravel(), ny, nx, step, width + 1, sc.norm_corners, sc.norm_area,
                           sc.corners, sc.weight,
                           sc.n_rects, sc.thr, sc.left, sc.right, sc.stage_thr, sc.bounds, MIN_WINDOW_STD)
    iy, ix = np.nonzero(accepted)
    return np.stack([ix * step, iy * step], axis=1).astype(np.int64)


def raw_detections(gray: np.ndarray, cascade: CascadeModel, scale_factor: float, min_size=(20, 20)) -> np.ndarray:
    """All windows accepted by every cascade stage for one scale factor, as (x, y, w, h)."""
    height, width = gray.shape
    sat = padded_integral(gray)
    sq = padded_integral(gray.astype(np.int64) ** 2)
    hits = []
    scale = 1.0
    while True:
        win_w = _round(cascade.window_width * scale)
        win_h = _round(cascade.window_height * scale)
        if win_w > width or win_h > height:
            break
        if win_w >= min_size[0] and win_h >= min_size[1]:
            sc = _ScaledCascade(cascade, scale, width + 1)
            step = max(1, _round(scale))
            pos = _evaluate_level(sc, sat, sq, width, height, step)
            if len(pos):
                wh = np.tile([sc.win_w, sc.win_h], (len(pos), 1))
                hits.append(np.hstack([pos, wh]))
        scale *= scale_factor
    if not hits:
        return np.empty((0, 4), dtype=np.int64)
    return np.vstack(hits)


def detect_pass(gray: np.ndarray, cascade: CascadeModel, scale_factor: float, params: DetectionParams):
    hits = raw_detections(gray, cascade, scale_factor, params.min_size)
    groups = group_boxes(hits, params.min_neighbors)
    return [box for box, _ in groups if box[2] >= params.min_size[0] and box[3] >= params.min_size[1]]


def merge_passes(passes) -> list:
    """Collapse boxes from several passes that overlap by IoU >= GROUP_IOU into one."""
    boxes = [b for p in passes for b in p]
    if not boxes:
        return []
    merged = [box for box, _ in group_boxes(boxes, 1)]
    return sorted(merged)


def detect_faces(image: RgbImage, cascade: CascadeModel, params: DetectionParams = DetectionParams()) -> list:
    """Face boxes ``(x, y, w, h)`` found by running the cascade once per scale factor."""
    gray = luminance(image)
    if image.width < params.min_size[0] or image.height < params.min_size[1]:
        return []
    passes = [detect_pass(gray, cascade, sf, params) for sf in params.scale_factors]
    return merge_passes(passes)
