"""Array-based CART classification trees (binary labels, Gini impurity).

Trees are stored as flat node arrays. ``feature[k] == -1`` marks a leaf;
internal nodes send rows with ``x[feature] <= threshold`` left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

LEAF = -1
TIE_TOL = 1e-12  # relative to node size; scores closer than this are ties


@njit(cache=True, nogil=True)
def _better(score, f, thr, best, bf, bthr, tol):
    if score < best - tol:
        return True
    if score <= best + tol:
        if bf < 0 or f < bf or (f == bf and thr < bthr):
            return True
    return False


@njit(cache=True, nogil=True)
def _build(X, y, sample, max_depth, min_split, min_leaf, mtry, keys):
    m = sample.shape[0]
    p = X.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    counts = np.zeros((cap, 2))
    depth_of = np.zeros(cap, dtype=np.int64)
    idx = sample.copy()

    # stack of (node, start, end)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    sp = 0
    st_node[0], st_start[0], st_end[0] = 0, 0, m
    sp = 1
    n_nodes = 1
    n_internal = 0
    vals = np.empty(m)
    labs = np.empty(m, dtype=np.int64)

    while sp > 0:
        sp -= 1
        node, start, end = st_node[sp], st_start[sp], st_end[sp]
        n = end - start
        c1 = 0
        for i in range(start, end):
            c1 += y[idx[i]]
        c0 = n - c1
        counts[node, 0] = c0
        counts[node, 1] = c1
        d = depth_of[node]
        if c0 == 0 or c1 == 0 or n < min_split or n < 2 * min_leaf or (max_depth >= 0 and d >= max_depth):
            continue

        order = np.argsort(keys[n_internal % keys.shape[0]])
        best, bf, bthr = np.inf, -1, 0.0
        tol = 1e-12 * n
        visited = 0
        for oi in range(p):
            f = order[oi]
            for i in range(n):
                vals[i] = X[idx[start + i], f]
            o = np.argsort(vals[:n])
            lo, hi = vals[o[0]], vals[o[n - 1]]
            if lo == hi:
                continue
            for i in range(n):
                labs[i] = y[idx[start + o[i]]]
            visited += 1
            l1 = 0
            for i in range(n - 1):
                l1 += labs[i]
                nl = i + 1
                nr = n - nl
                if nl < min_leaf:
                    continue
                if nr < min_leaf:
                    break
                a, b = vals[o[i]], vals[o[i + 1]]
                if a == b:
                    continue
                r1 = c1 - l1
                score = 2.0 * (l1 * (nl - l1) / nl + r1 * (nr - r1) / nr)
                thr = 0.5 * (a + b)
                if thr >= b:
                    thr = a
                if _better(score, f, thr, best, bf, bthr, tol):
                    best, bf, bthr = score, f, thr
            if visited >= mtry:
                break
        if bf < 0:
            continue

        # partition idx[start:end] so rows going left come first
        i, j = start, end - 1
        while i <= j:
            if X[idx[i], bf] <= bthr:
                i += 1
            else:
                t = idx[i]
                idx[i] = idx[j]
                idx[j] = t
                j -= 1
        n_internal += 1
        feature[node] = bf
        threshold[node] = bthr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        depth_of[n_nodes] = d + 1
        depth_of[n_nodes + 1] = d + 1
        st_node[sp], st_start[sp], st_end[sp] = n_nodes + 1, i, end
        sp += 1
        st_node[sp], st_start[sp], st_end[sp] = n_nodes, start, i
        sp += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), counts[:n_nodes].copy(), depth_of[:n_nodes].copy())


@njit(cache=True, nogil=True)
def _predict(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        k = 0
        while feature[k] >= 0:
            k = left[k] if X[r, feature[k]] <= threshold[k] else right[k]
        out[r] = value[k]
    return out


@njit(cache=True, nogil=True)
def _forest_votes(X, feature, threshold, left, right, value, offsets):
    """(n_trees, n_rows) per-tree class predictions; node arrays concatenated with offsets."""
    T = offsets.shape[0] - 1
    out = np.empty((T, X.shape[0]), dtype=np.int8)
    for t in range(T):
        base = offsets[t]
        for r in range(X.shape[0]):
            k = base
            while feature[k] >= 0:
                k = base + (left[k] if X[r, feature[k]] <= threshold[k] else right[k])
            out[t, r] = value[k]
    return out


@dataclass(frozen=True)
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray   # (n_nodes, 2) training class counts per node
    depth: np.ndarray

    @property
    def value(self) -> np.ndarray:
        """Leaf class: the majority of its training rows, ties to class 0."""
        return (self.counts[:, 1] > self.counts[:, 0]).astype(np.int64)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def is_leaf(self) -> np.ndarray:
        return self.feature == LEAF

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict(X, self.feature, self.threshold, self.left, self.right, self.value)

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": [float(v) for v in self.threshold],
                "left": self.left.tolist(), "right": self.right.tolist(), "counts": self.counts.tolist(),
                "depth": self.depth.tolist()}

    @classmethod
    def from_dict(cls, d) -> "DecisionTree":
        return cls(np.asarray(d["feature"], dtype=np.int64), np.asarray(d["threshold"], dtype=np.float64),
                   np.asarray(d["left"], dtype=np.int64), np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["counts"], dtype=np.float64).reshape(-1, 2), np.asarray(d["depth"], dtype=np.int64))


def n_candidate_features(max_features, p: int) -> int:
    if max_features in (None, "all"):
        return p
    if max_features == "sqrt":
        return max(1, int(math.sqrt(p)))
    if max_features == "log2":
        return max(1, int(math.log2(p)))
    if isinstance(max_features, int) and 1 <= max_features <= p:
        return max_features
    raise ValueError(f"max_features must be 'sqrt', 'log2', 'all' or None, got {max_features!r}")


def train_tree(X, y, row_sample, rng, max_depth=None, min_samples_split=2, min_samples_leaf=1,
               max_features="all") -> DecisionTree:
    """Greedy Gini CART on the rows in ``row_sample`` (repeats allowed).

    Each node scans a fresh random ordering of the features and stops after
    ``max_features`` of them turned out non-constant in the node. Candidate
    thresholds are midpoints between consecutive distinct values; the split
    with the lowest weighted child impurity wins, ties going to the lowest
    feature index and then the lowest threshold.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    sample = np.ascontiguousarray(row_sample, dtype=np.int64)
    if sample.size == 0:
        raise ValueError("row_sample is empty")
    p = X.shape[1]
    mtry = n_candidate_features(max_features, p)
    # one row of random sort keys per internal node; a tree has fewer than len(sample) of them
    keys = rng.random((max(sample.size - 1, 1), p))
    arrays = _build(X, y, sample, -1 if max_depth is None else int(max_depth), int(min_samples_split),
                    int(min_samples_leaf), mtry, keys)
    return DecisionTree(*arrays)
