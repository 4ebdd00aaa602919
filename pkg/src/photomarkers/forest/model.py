"""Bagged random forests with per-tree seed streams."""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .tree import DecisionTree, _forest_votes, n_candidate_features, train_tree

MODEL_FORMAT = "photomarkers-forest"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 1200
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: Optional[str] = "sqrt"
    seed: int = 0
    bootstrap: bool = True  # False trains every tree on all rows (test hook)

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 1:
            raise ValueError("min_samples_split must be >= 1")
        if self.min_samples_split == 1:
            # a one-row node cannot be split; 2 is the smallest meaningful value
            warnings.warn("min_samples_split=1 normalised to 2", UserWarning, stacklevel=3)
            object.__setattr__(self, "min_samples_split", 2)
        if self.max_features == "all":
            object.__setattr__(self, "max_features", None)
        if self.max_features not in (None, "sqrt", "log2"):
            raise ValueError(f"max_features must be 'log2', 'sqrt' or None/'all', got {self.max_features!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def params(self) -> dict:
        d = self.to_dict()
        d.pop("seed")
        d.pop("bootstrap")
        return d


def tree_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(t)]))


def _fit_one(X, y, cfg: ForestConfig, t: int):
    rng = tree_rng(cfg.seed, t)
    n = X.shape[0]
    sample = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
    tree = train_tree(X, y, sample, rng, cfg.max_depth, cfg.min_samples_split, cfg.min_samples_leaf,
                      cfg.max_features)
    in_bag = np.zeros(n, dtype=bool)
    in_bag[sample] = True
    return tree, np.packbits(~in_bag)


@dataclass
class ForestModel:
    trees: list
    config: ForestConfig
    feature_names: tuple
    oob_packed: list = field(default_factory=list, repr=False)
    n_train: int = 0
    _flat: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.trees) != self.config.n_estimators:
            raise ValueError("tree count must equal n_estimators")

    def oob_rows(self, t: int) -> np.ndarray:
        """Training rows left out of tree ``t``'s bootstrap sample."""
        return np.flatnonzero(np.unpackbits(self.oob_packed[t], count=self.n_train).astype(bool))

    def _packed(self):
        if self._flat is None:
            sizes = [t.n_nodes for t in self.trees]
            offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
            self._flat = (
                np.concatenate([t.feature for t in self.trees]),
                np.concatenate([t.threshold for t in self.trees]),
                np.concatenate([t.left for t in self.trees]),
                np.concatenate([t.right for t in self.trees]),
                np.concatenate([t.value for t in self.trees]),
                offsets,
            )
        return self._flat

    def tree_votes(self, X) -> np.ndarray:
        """(n_trees, n_rows) per-tree predicted classes."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(f"expected {len(self.feature_names)} feature columns")
        return _forest_votes(X, *self._packed())

    def predict(self, X) -> np.ndarray:
        """Majority vote; an exact tie goes to class 0."""
        return majority_vote(self.tree_votes(X))

    def split_counts(self) -> dict:
        counts = np.zeros(len(self.feature_names), dtype=np.int64)
        for t in self.trees:
            f = t.feature[t.feature >= 0]
            counts += np.bincount(f, minlength=len(self.feature_names))
        return {n: int(c) for n, c in zip(self.feature_names, counts)}

    def summary(self) -> dict:
        nodes = np.array([t.n_nodes for t in self.trees])
        depth = np.array([t.max_depth for t in self.trees])
        return {"config": self.config.to_dict(), "feature_names": list(self.feature_names), "n_train": self.n_train,
                "n_trees": len(self.trees), "nodes_mean": float(nodes.mean()), "depth_mean": float(depth.mean()),
                "depth_max": int(depth.max()), "split_counts": self.split_counts()}

    def dumps(self) -> str:
        doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "config": self.config.to_dict(),
               "feature_names": list(self.feature_names), "n_train": self.n_train,
               "trees": [t.to_dict() for t in self.trees]}
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "ForestModel":
        doc = json.loads(text)
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError("not a serialized forest model")
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported forest model version {doc.get('version')!r}")
        cfg = ForestConfig(**doc["config"])
        trees = [DecisionTree.from_dict(t) for t in doc["trees"]]
        return cls(trees, cfg, tuple(doc["feature_names"]), [], int(doc.get("n_train", 0)))


def majority_vote(votes: np.ndarray) -> np.ndarray:
    ones = votes.sum(axis=0, dtype=np.int64)
    return (2 * ones > votes.shape[0]).astype(np.int64)


def train_forest(X, y, config: ForestConfig = ForestConfig(), feature_names=None, threads: int = 1) -> ForestModel:
    """``n_estimators`` trees, tree ``t`` drawing its bootstrap and feature orderings from SeedSequence([seed, t])."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, p) with len(y) == n")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise ValueError("training labels contain a single class")
    n_candidate_features(config.max_features, X.shape[1])
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            fitted = list(ex.map(lambda t: _fit_one(X, y, config, t), range(config.n_estimators)))
    else:
        fitted = [_fit_one(X, y, config, t) for t in range(config.n_estimators)]
    return ForestModel([f[0] for f in fitted], config, names, [f[1] for f in fitted], X.shape[0])
