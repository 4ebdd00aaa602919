"""Chi-squared test of independence for filter-usage contingency tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special


def chi2_upper_tail(x: float, df: int) -> float:
    """P(X >= x) for X ~ chi-squared(df): the regularised upper incomplete gamma Q(df/2, x/2)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x < 0:
        raise ValueError("x must be >= 0")
    return float(special.gammaincc(df / 2.0, x / 2.0))


@dataclass(frozen=True)
class ContingencyTable:
    row_labels: tuple
    col_labels: tuple
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.float64)
        if c.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(f"counts shape {c.shape} does not match labels")
        if (c < 0).any():
            raise ValueError("counts must be >= 0")
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_pairs(cls, pairs, rows=None, cols=("depressed", "healthy")) -> "ContingencyTable":
        """Count ``(row_label, col_label)`` observations; rows default to sorted labels seen."""
        pairs = list(pairs)
        rows = tuple(sorted({r for r, _ in pairs})) if rows is None else tuple(rows)
        ri = {r: i for i, r in enumerate(rows)}
        ci = {c: j for j, c in enumerate(cols)}
        counts = np.zeros((len(rows), len(cols)))
        for r, c in pairs:
            counts[ri[r], ci[c]] += 1
        return cls(rows, tuple(cols), counts)


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    df: int
    p_value: float
    expected: np.ndarray
    difference: np.ndarray   # observed - expected
    table: ContingencyTable

    def bars(self) -> list:
        """Rows ``(row, col, observed, expected, difference)`` in table order."""
        t = self.table
        return [(t.row_labels[i], t.col_labels[j], float(t.counts[i, j]), float(self.expected[i, j]),
                 float(self.difference[i, j]))
                for i in range(len(t.row_labels)) for j in range(len(t.col_labels))]


def chi2_independence(table: ContingencyTable) -> Chi2Result:
    """Pearson chi-squared statistic (no continuity correction) with df = (r-1)(c-1)."""
    O = table.counts
    if O.shape[0] < 2 or O.shape[1] < 2:
        raise ValueError("need at least 2 rows and 2 columns")
    rows, cols = O.sum(axis=1), O.sum(axis=0)
    for i, v in enumerate(rows):
        if v <= 0:
            raise ValueError(f"row {table.row_labels[i]!r} has a zero marginal total")
    for j, v in enumerate(cols):
        if v <= 0:
            raise ValueError(f"column {table.col_labels[j]!r} has a zero marginal total")
    E = np.outer(rows, cols) / O.sum()
    diff = O - E
    stat = float(np.sum(diff * diff / E))
    df = (O.shape[0] - 1) * (O.shape[1] - 1)
    return Chi2Result(stat, df, chi2_upper_tail(stat, df), E, diff, table)
