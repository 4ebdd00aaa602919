"""Detector accuracy against hand annotations, split by group and detector verdict."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GROUPS = ("depressed", "healthy")


@dataclass(frozen=True)
class CellAccuracy:
    group: str
    detected: bool
    n: int
    correct: int

    @property
    def accuracy(self):
        return self.correct / self.n if self.n else None

    @property
    def label(self) -> str:
        verdict = "1+ faces detected" if self.detected else "No face detected"
        return f"{self.group.capitalize()}, {verdict}"


@dataclass(frozen=True)
class AccuracyReport:
    cells: tuple
    count_diff_mean: dict
    count_diff_sd: dict
    n_photos: int
    exclusions: int
    excluded_keys: tuple = field(default=())

    def lines(self) -> list:
        out = []
        for c in self.cells:
            acc = "n/a" if c.accuracy is None else f"{100 * c.accuracy:.0f}%"
            out.append(f"{c.label}: {acc} accurate")
        for g in GROUPS:
            mu, sd = self.count_diff_mean.get(g), self.count_diff_sd.get(g)
            if mu is not None:
                sd_txt = "n/a" if sd is None else f"{sd:.3f}"
                out.append(f"{g.capitalize()} face count difference: mu = {mu:.3f}, sigma = {sd_txt}")
        out.append(f"Excluded (no annotation): {self.exclusions}")
        return out

    def to_dict(self) -> dict:
        return {
            "cells": [{"group": c.group, "detected": c.detected, "n": c.n, "correct": c.correct,
                       "accuracy": c.accuracy} for c in self.cells],
            "count_diff": {g: {"mean": self.count_diff_mean.get(g), "sd": self.count_diff_sd.get(g)}
                           for g in GROUPS},
            "n_photos": self.n_photos,
            "exclusions": self.exclusions,
        }


def detector_accuracy_report(detections: dict, annotations: dict) -> AccuracyReport:
    """Four-cell accuracy table and count-difference moments.

    Parameters
    ----------
    detections : dict
        photo key -> detected face count.
    annotations : dict
        photo key -> ``(group, actual_face_count)``; the face boolean is
        ``actual_face_count >= 1``.

    A cell holds the photos of one group with one detector verdict (no face
    vs 1+ faces); its accuracy is the fraction whose annotated presence
    agrees with the verdict. Count differences are detected minus actual,
    with the sample sd (ddof=1, undefined for a single photo).
    """
    excluded = sorted(str(k) for k in detections if k not in annotations)
    tally = {(g, d): [0, 0] for g in GROUPS for d in (False, True)}
    diffs = {g: [] for g in GROUPS}
    for key, n_det in detections.items():
        if key not in annotations:
            continue
        group, actual = annotations[key]
        if group not in GROUPS:
            raise ValueError(f"{key}: unknown group {group!r}")
        det = int(n_det) >= 1
        cell = tally[(group, det)]
        cell[0] += 1
        cell[1] += int(det == (int(actual) >= 1))
        diffs[group].append(int(n_det) - int(actual))

    cells = tuple(CellAccuracy(g, d, *tally[(g, d)]) for g in GROUPS for d in (False, True))
    mean, sd = {}, {}
    for g in GROUPS:
        a = np.asarray(diffs[g], dtype=np.float64)
        mean[g] = float(a.mean()) if a.size else None
        sd[g] = float(a.std(ddof=1)) if a.size > 1 else None
    return AccuracyReport(cells, mean, sd, sum(len(v) for v in diffs.values()), len(excluded), tuple(excluded))
