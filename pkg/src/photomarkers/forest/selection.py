"""Stratified splitting, cross-validated grid search and repeated holdout runs."""

from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .metrics import METRICS, ConfusionMetrics, evaluate
from .model import ForestConfig, majority_vote, train_forest

DEFAULT_GRID = {
    "n_estimators": [120, 300, 500, 800, 1200],
    "max_depth": [5, 8, 15, 25, 30, None],
    "min_samples_split": [1, 2, 5, 10, 15, 100],
    "min_samples_leaf": [1, 2, 5, 10],
    "max_features": ["log2", "sqrt", None],
}
# desk-scale subset of the same axes
DESK_GRID = {
    "n_estimators": [120, 300],
    "max_depth": [8, None],
    "min_samples_split": [2],
    "min_samples_leaf": [1, 5],
    "max_features": ["sqrt"],
}
GRID_KEYS = tuple(DEFAULT_GRID)


def stratified_kfold(y, k: int = 5, seed: int = 0) -> list:
    """``k`` disjoint index arrays covering every row.

    Rows are shuffled within class, laid out class by class, and row ``i``
    of that layout goes to fold ``i mod k``; per-class and total fold
    sizes therefore differ by at most one.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    layout = []
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if members.size < k:
            raise ValueError(f"class {c!r} has {members.size} members, fewer than k={k}")
        layout.append(rng.permutation(members))
    layout = np.concatenate(layout)
    return [np.sort(layout[f::k]) for f in range(k)]


def split_train_test(y, fraction: float = 0.7, seed: int = 0):
    """Stratified split: each class sends round(fraction * n_c) rows to training."""
    y = np.asarray(y)
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("need at least two classes")
    train, test = [], []
    for c in classes:
        members = rng.permutation(np.flatnonzero(y == c))
        if members.size < 2:
            raise ValueError(f"class {c!r} has fewer than 2 members")
        n_tr = min(max(int(math.floor(fraction * members.size + 0.5)), 1), members.size - 1)
        train.append(members[:n_tr])
        test.append(members[n_tr:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def expand_grid(grid: dict) -> list:
    """Every combination as a dict, in row-major order over GRID_KEYS."""
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    axes = [list(grid.get(k, [ForestConfig.__dataclass_fields__[k].default])) for k in GRID_KEYS]
    if any(len(a) == 0 for a in axes):
        raise ValueError("grid axes must be non-empty")
    return [dict(zip(GRID_KEYS, combo)) for combo in itertools.product(*axes)]


def _score(m: ConfusionMetrics, metric: str) -> float:
    v = getattr(m, metric)
    return 0.0 if v is None else float(v)  # an undefined score ranks as the worst


def _depth_key(d):
    return math.inf if d is None else d


@dataclass
class GridResult:
    best: ForestConfig
    table: list   # one dict per combination: params, per-fold scores, mean/sd
    metric: str

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = [*GRID_KEYS, f"mean_{self.metric}", f"sd_{self.metric}", *(f"mean_{m}" for m in METRICS), "rank"]
        w.writerow(head)
        for row in self.table:
            w.writerow([("None" if row[k] is None else row[k]) for k in GRID_KEYS]
                       + [_fmt(row["mean_score"]), _fmt(row["sd_score"])]
                       + [_fmt(row["mean_" + m]) for m in METRICS] + [row["rank"]])
        return buf.getvalue()


def _fmt(v):
    return "" if v is None else repr(float(v))


def _mean_defined(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def grid_search(X, y, grid: dict = DESK_GRID, k: int = 5, seed: int = 0, metric: str = "f1",
                threads: int = 1) -> GridResult:
    """Exhaustive stratified k-fold search; best mean score wins.

    Ties on the mean score go to fewer trees, then the shallower depth
    (unlimited counts as deepest), then grid order. Forests in a fold
    share per-tree seeds, so one forest with the largest tree count is
    trained per setting and every smaller count is scored on its first
    trees, which is the exact forest that count would train.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    combos = expand_grid(grid)
    folds = stratified_kfold(y, k, seed)
    fold_metrics = {i: [] for i in range(len(combos))}

    groups = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for i, c in enumerate(combos):
            rest = tuple((kk, c[kk]) for kk in GRID_KEYS if kk != "n_estimators")
            groups.setdefault(ForestConfig(n_estimators=1, **dict(rest)).params().__repr__(), []).append(i)
        for idxs in groups.values():
            base = combos[idxs[0]]
            n_max = max(combos[i]["n_estimators"] for i in idxs)
            params = {kk: base[kk] for kk in GRID_KEYS if kk != "n_estimators"}
            for f, test in enumerate(folds):
                train = np.setdiff1d(np.arange(y.size), test, assume_unique=True)
                model = train_forest(X[train], y[train], ForestConfig(n_estimators=n_max, seed=seed, **params),
                                     threads=threads)
                votes = model.tree_votes(X[test])
                for i in idxs:
                    pred = majority_vote(votes[:combos[i]["n_estimators"]])
                    fold_metrics[i].append(evaluate(y[test], pred))

    table = []
    for i, c in enumerate(combos):
        ms = fold_metrics[i]
        scores = [_score(m, metric) for m in ms]
        row = dict(c)
        row["min_samples_split"] = max(2, c["min_samples_split"])
        row["min_samples_split_requested"] = c["min_samples_split"]
        row["fold_scores"] = scores
        row["mean_score"] = float(np.mean(scores))
        row["sd_score"] = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
        for m in METRICS:
            row["mean_" + m] = _mean_defined([getattr(x, m) for x in ms])
        table.append(row)

    order = sorted(range(len(table)), key=lambda i: (-round(table[i]["mean_score"], 12),
                                                     table[i]["n_estimators"], _depth_key(table[i]["max_depth"]), i))
    for rank, i in enumerate(order, start=1):
        table[i]["rank"] = rank
    b = table[order[0]]
    best = ForestConfig(n_estimators=b["n_estimators"], max_depth=b["max_depth"],
                        min_samples_split=b["min_samples_split"], min_samples_leaf=b["min_samples_leaf"],
                        max_features=b["max_features"], seed=seed)
    return GridResult(best, table, metric)


@dataclass
class RunReport:
    runs: list        # ConfusionMetrics per run
    configs: list     # ForestConfig per run
    mean: dict
    sd: dict
    models: list = field(default_factory=list)  # filled when keep_models=True

    @property
    def n_runs(self) -> int:
        return len(self.runs)

    def to_dict(self) -> dict:
        return {"n_runs": self.n_runs, "mean": self.mean, "sd": self.sd,
                "runs": [m.to_dict() for m in self.runs], "config": self.configs[0].to_dict() if self.configs else None}

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "tp", "fp", "fn", "tn", *METRICS, "accuracy"])
        for i, m in enumerate(self.runs):
            w.writerow([i, m.tp, m.fp, m.fn, m.tn, *(_fmt(getattr(m, x)) for x in METRICS), _fmt(m.accuracy)])
        w.writerow(["mean", "", "", "", "", *(_fmt(self.mean[x]) for x in METRICS), _fmt(self.mean["accuracy"])])
        w.writerow(["sd", "", "", "", "", *(_fmt(self.sd[x]) for x in METRICS), _fmt(self.sd["accuracy"])])
        return buf.getvalue()


def repeated_runs(X, y, config: ForestConfig, n_runs: int = 5, seed: int = 0, fraction: float = 0.7,
                  threads: int = 1, keep_models: bool = False) -> RunReport:
    """``n_runs`` stratified 70/30 split, train, evaluate cycles; run r uses seed + r for both."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    runs, configs, models = [], [], []
    for r in range(n_runs):
        train, test = split_train_test(y, fraction, seed + r)
        cfg = replace(config, seed=seed + r)
        model = train_forest(X[train], y[train], cfg, threads=threads)
        runs.append(evaluate(y[test], model.predict(X[test])))
        configs.append(cfg)
        if keep_models:
            models.append(model)
    mean, sd = {}, {}
    for m in (*METRICS, "accuracy"):
        vals = [getattr(x, m) for x in runs if getattr(x, m) is not None]
        mean[m] = float(np.mean(vals)) if vals else None
        sd[m] = (float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0) if vals else None
    return RunReport(runs, configs, mean, sd, models)
