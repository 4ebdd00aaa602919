"""Confusion-table metrics with undefined ratios kept distinct from zero."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

METRICS = ("recall", "specificity", "precision", "npv", "f1")


def _ratio(a, b) -> Optional[float]:
    return a / b if b else None


@dataclass(frozen=True)
class ConfusionMetrics:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be >= 0")

    @property
    def recall(self):
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def specificity(self):
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def precision(self):
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def npv(self):
        return _ratio(self.tn, self.tn + self.fn)

    @property
    def f1(self):
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self):
        """Naive accuracy; misleading under class imbalance, see ``imbalance``."""
        return _ratio(self.tp + self.tn, self.n)

    @property
    def imbalance(self):
        """Share of the larger true class."""
        n = self.n
        return max(self.tp + self.fn, self.tn + self.fp) / n if n else None

    def to_dict(self) -> dict:
        d = {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}
        d.update({m: getattr(self, m) for m in METRICS})
        d["accuracy"] = self.accuracy
        d["majority_class_share"] = self.imbalance
        return d


def evaluate(y_true, y_pred) -> ConfusionMetrics:
    """Confusion counts with class 1 (depressed) as the positive class."""
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    return ConfusionMetrics(int(np.sum((t == 1) & (p == 1))), int(np.sum((t == 0) & (p == 1))),
                            int(np.sum((t == 1) & (p == 0))), int(np.sum((t == 0) & (p == 0))))
