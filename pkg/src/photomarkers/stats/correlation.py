"""Pearson correlation, lower-triangular correlation tables, inter-rater agreement."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import special


def pearson_r(x, y):
    """Product-moment correlation and its two-sided p-value from the t transform.

    Returns ``(r, p)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 observations")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("zero-variance input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    p = float(2 * special.stdtr(n - 2, -abs(t)))
    return r, p


@dataclass(frozen=True)
class CorrelationTable:
    columns: tuple
    r: np.ndarray    # NaN above the diagonal
    p: np.ndarray
    n: int

    def rows(self):
        """Lower-triangle rows: ``(column, [r to each earlier column and itself])``."""
        return [(c, [float(v) for v in self.r[i, :i + 1]]) for i, c in enumerate(self.columns)]


def correlation_matrix(matrix, columns) -> CorrelationTable:
    """Pairwise Pearson r between ``columns`` of a FeatureMatrix, lower triangle only."""
    columns = tuple(columns)
    for c in columns:
        if c not in matrix.feature_names:
            raise KeyError(f"unknown column {c!r}")
    k = len(columns)
    r = np.full((k, k), np.nan)
    p = np.full((k, k), np.nan)
    data = {c: matrix.column(c) for c in columns}
    for i, a in enumerate(columns):
        for j in range(i + 1):
            try:
                if i == j:
                    pearson_r(data[a], data[a])  # surfaces zero variance
                    r[i, j], p[i, j] = 1.0, 0.0
                else:
                    r[i, j], p[i, j] = pearson_r(data[a], data[columns[j]])
            except ValueError as exc:
                raise ValueError(f"{a} x {columns[j]}: {exc}") from None
    return CorrelationTable(columns, r, p, matrix.n)


@dataclass(frozen=True)
class AgreementReport:
    categories: tuple
    r: dict            # category -> mean r over folds
    p: dict            # category -> mean p over folds
    fold_r: dict       # category -> per-fold r
    n_photos: int
    excluded: int      # photos with fewer than two raters

    def to_dict(self) -> dict:
        return {"r": self.r, "p": self.p, "fold_r": self.fold_r, "n_photos": self.n_photos,
                "excluded": self.excluded}


def interrater_agreement(ratings, n_folds: int = 5, seed: int = 0,
                         categories=("happy", "sad", "likable", "interesting")) -> AgreementReport:
    """Average Pearson r between two randomly chosen raters per photo.

    Each fold draws, for every photo with at least two ratings, two distinct
    ratings uniformly at random; the first and second picks form two
    vectors across photos. Fold ``f`` uses ``default_rng(seed + f)``.
    """
    per_photo = defaultdict(list)
    for r in ratings:
        per_photo[r.post_id].append([getattr(r, c) for c in categories])
    keys = sorted(per_photo)
    usable = [k for k in keys if len(per_photo[k]) >= 2]
    excluded = len(keys) - len(usable)
    if not usable:
        raise ValueError("no photo has at least two raters")
    if len(usable) < 3:
        raise ValueError("need at least three photos with two or more raters")
    arrays = [np.asarray(per_photo[k], dtype=np.float64) for k in usable]
    sizes = np.array([a.shape[0] for a in arrays])
    fold_r = {c: [] for c in categories}
    fold_p = {c: [] for c in categories}
    for f in range(n_folds):
        rng = np.random.default_rng(seed + f)
        # two distinct indices per photo: first uniform, second uniform over the rest
        i = np.floor(rng.random(len(arrays)) * sizes).astype(np.int64)
        j = np.floor(rng.random(len(arrays)) * (sizes - 1)).astype(np.int64)
        j = j + (j >= i)
        a = np.stack([arr[ii] for arr, ii in zip(arrays, i)])
        b = np.stack([arr[jj] for arr, jj in zip(arrays, j)])
        for ci, c in enumerate(categories):
            r, p = pearson_r(a[:, ci], b[:, ci])
            fold_r[c].append(r)
            fold_p[c].append(p)
    return AgreementReport(tuple(categories), {c: float(np.mean(fold_r[c])) for c in categories},
                           {c: float(np.mean(fold_p[c])) for c in categories}, fold_r, len(usable), excluded)
