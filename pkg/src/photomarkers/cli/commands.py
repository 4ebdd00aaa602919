"""Pipeline stages. Each command reads upstream files under ``--out`` and writes its own atomically."""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from pathlib import Path

import numpy as np

from ..cohort import (
    COMPUTATIONAL_FEATURES, RATING_FEATURES, RecordError, admit_cohort, aggregate_ratings, aggregate_user_days,
    build_feature_matrix, dataset_counts, generate_cohort, matrix_to_csv, pre_diagnosis_posts, read_matrix_csv,
    read_participants, read_posts, read_ratings, split_pre_diagnosis, standardize, summary_stats,
)
from ..cohort.records import dumps_jsonl, post_key, post_to_dict
from ..forest import METRICS, grid_search, repeated_runs, split_train_test
from ..imaging import CascadeFormatError, default_cascade, extract_batch, load_cascade
from ..inference import (
    LogitSpec, design_matrix, draws_csv, fit_logit_mle, null_model_factor, posterior_predictive_check,
    run_metropolis, summarize_posterior,
)
from ..stats import ContingencyTable, chi2_independence
from .artifacts import Layout, atomic_write, read_json, with_header, write_json
from .config import BENCHMARK, PipelineConfig

log = logging.getLogger("photomarkers")

RHAT_LIMIT = 1.1
DATASETS = ("all", "pre", "ratings")


class PipelineError(Exception):
    exit_code = 1


class DataError(PipelineError):
    exit_code = 1


class MissingResource(PipelineError):
    exit_code = 2


class ConvergenceFailure(PipelineError):
    exit_code = 3


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingResource(f"{what} not found: {path}")
    return path


def _input(cfg: PipelineConfig, key: str, fallback: Path) -> Path:
    p = cfg.path(cfg.data["inputs"][key])
    return p if p is not None else fallback


def _read(reader, path: Path, what: str):
    _require(path, what)
    try:
        return reader(path)
    except RecordError as exc:
        raise DataError(str(exc)) from None


# ---- synth -----------------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig, layout: Layout) -> dict:
    try:
        spec = cfg.cohort_spec()
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid cohort spec: {exc}") from None
    cohort = generate_cohort(spec, cfg.seed)
    files = cohort.jsonl()
    for name in ("participants.jsonl", "posts.jsonl", "ratings.jsonl"):
        atomic_write(layout.cohort / name, files[name])
    write_json(layout.cohort / "truth.json", {**cohort.truth, **cfg.provenance()})
    log.info("synth: %d participants, %d posts, %d ratings", len(cohort.participants), len(cohort.posts),
             len(cohort.ratings))
    return {"participants": len(cohort.participants), "posts": len(cohort.posts), "ratings": len(cohort.ratings)}


# ---- extract ---------------------------------------------------------------------

def _cascade(cfg: PipelineConfig):
    p = cfg.path(cfg.data["cascade"])
    if p is None:
        return default_cascade()
    _require(p, "cascade file")
    try:
        return load_cascade(p)
    except CascadeFormatError as exc:
        raise DataError(str(exc)) from None


def cmd_extract(cfg: PipelineConfig, layout: Layout) -> dict:
    cascade = _cascade(cfg)
    posts_path = _input(cfg, "posts", layout.cohort / "posts.jsonl")
    posts = _read(read_posts, posts_path, "posts file")
    root = cfg.path(cfg.data["inputs"]["image_root"]) or posts_path.parent
    items, errors = [], []
    for i, p in enumerate(posts):
        if p.image_ref is not None:
            items.append((post_key(p, i), root / p.image_ref))
        elif p.features is None:
            errors.append({"key": post_key(p, i), "kind": "NoImage", "message": "post has no image_path"})
    feats, failed = extract_batch(items, cascade, cfg.detection())
    errors += [e.to_dict() for e in failed]
    out = []
    for i, p in enumerate(posts):
        d = post_to_dict(p)
        f = feats.get(post_key(p, i))
        if f is not None:
            d["features"] = f.to_dict()
        out.append(d)
    atomic_write(layout.features / "posts.jsonl", dumps_jsonl(out))
    atomic_write(layout.features / "errors.jsonl", dumps_jsonl(sorted(errors, key=lambda e: e["key"])))
    write_json(layout.features / "manifest.json", {**cfg.provenance(), "posts": len(posts), "extracted": len(feats),
                                                   "errors": len(errors)})
    log.info("extract: %d photos, %d errors", len(feats), len(errors))
    return {"extracted": len(feats), "errors": len(errors)}


# ---- aggregate -------------------------------------------------------------------

def _posts_path(cfg: PipelineConfig, layout: Layout) -> Path:
    p = cfg.path(cfg.data["inputs"]["features"])
    if p is not None:
        return p
    extracted = layout.features / "posts.jsonl"
    if extracted.exists():
        return extracted
    return _input(cfg, "posts", layout.cohort / "posts.jsonl")


def _ratings_path(cfg: PipelineConfig, layout: Layout):
    p = _input(cfg, "ratings", layout.cohort / "ratings.jsonl")
    return p if p.exists() else None


def _load_cohort(cfg: PipelineConfig, layout: Layout):
    participants = _read(read_participants, _input(cfg, "participants", layout.cohort / "participants.jsonl"),
                         "participants file")
    posts = _read(read_posts, _posts_path(cfg, layout), "posts file")
    if not posts:
        raise DataError("posts file is empty")
    admitted, excluded = admit_cohort(participants, posts)
    keep = set(admitted)
    people = [p for p in participants if p.id in keep]
    for g in ("depressed", "healthy"):
        if not any(p.group == g for p in people):
            raise DataError(f"admission removed every {g} participant ({len(excluded)} excluded)")
    return people, posts, excluded


def cmd_aggregate(cfg: PipelineConfig, layout: Layout) -> dict:
    people, posts, excluded = _load_cohort(cfg, layout)
    ratings_path = _ratings_path(cfg, layout)
    rating_agg = None
    if ratings_path is not None:
        rating_agg = aggregate_ratings(_read(read_ratings, ratings_path, "ratings file"))
    res = aggregate_user_days(posts, people, rating_agg.means if rating_agg else None)
    if not res.user_days:
        raise DataError("no post carries features; run extract first")
    owner = {post_key(q, i): q.participant_id for i, q in enumerate(posts)}
    skipped = Counter("excluded participant" if owner[key] in excluded else reason for key, reason in res.skipped)

    prov = cfg.provenance()
    days = {"all": res.user_days, "pre": split_pre_diagnosis(res.user_days, people)}
    out = {}
    for name, ud in days.items():
        m = build_feature_matrix(ud, COMPUTATIONAL_FEATURES)
        atomic_write(layout.matrix(name), with_header(matrix_to_csv(m), prov))
        out[name] = dataset_counts(ud)
    if rating_agg is not None:
        rated = [d for d in res.user_days if d.ratings is not None]
        if rated:
            m = build_feature_matrix(rated, RATING_FEATURES)
            atomic_write(layout.matrix("ratings"), with_header(matrix_to_csv(m), prov))
            out["ratings"] = dataset_counts(rated)
    people_ids = {p.id for p in people}
    summary = {
        **prov,
        "table": summary_stats(people, [q for q in posts if q.participant_id in people_ids]),
        "datasets": out,
        "excluded": dict(sorted(excluded.items())),
        "skipped_posts": dict(sorted(skipped.items())),
    }
    if rating_agg is not None:
        summary["ratings"] = {"rated_posts": len(rating_agg.means), "flagged_under_3_raters": len(rating_agg.flagged)}
    write_json(layout.aggregate / "summary.json", summary)
    log.info("aggregate: %s", {k: v["observations"] for k, v in out.items()})
    return summary


# ---- fit ---------------------------------------------------------------------------

def _matrix(layout: Layout, dataset: str, features):
    path = _require(layout.matrix(dataset), f"{dataset} matrix (run aggregate first)")
    try:
        m = read_matrix_csv(path).select(features)
    except (KeyError, ValueError) as exc:
        raise DataError(str(exc)) from None
    if m.n == 0 or np.unique(m.target).size < 2:
        raise DataError(f"{dataset} dataset needs observations from both groups")
    return m


def cmd_fit(cfg: PipelineConfig, layout: Layout, dataset: str = "all") -> dict:
    if dataset not in DATASETS:
        raise DataError(f"unknown dataset {dataset!r}")
    features = tuple(cfg.data["model"]["rating_features" if dataset == "ratings" else "features"])
    m = _matrix(layout, dataset, features)
    try:
        z = standardize(m)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    X, y = design_matrix(z.values), z.target.astype(np.float64)
    spec = LogitSpec(features, cfg.data["model"]["b0"], cfg.data["model"]["B0"])
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            freq = fit_logit_mle(X, y, spec.names)
            chains = run_metropolis(X, y, spec, cfg.mcmc(), threads=cfg.threads)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    post = summarize_posterior(chains, spec.names)
    bf = null_model_factor(X, y, spec)
    ppc = posterior_predictive_check(chains, X, y, n_rep=cfg.data["ppc_replicates"], seed=cfg.seed)
    max_rhat = post.max_rhat()
    report = {
        **cfg.provenance(),
        "dataset": dataset,
        "n_obs": m.n,
        "depressed_share": float(m.target.mean()),
        "features": list(features),
        "standardization": {"mean": dict(zip(features, map(float, z.means))),
                            "sd": dict(zip(features, map(float, z.sds)))},
        "frequentist": freq.to_dict(),
        "bayesian": post.to_dict(),
        "bayes_factor": bf.to_dict(),
        "ppc": {"p": ppc.p_value, "observed": ppc.observed, "replicated_mean": ppc.replicated_mean,
                "n_rep": ppc.n_rep},
        "mcmc": {**cfg.data["mcmc"], "seed": cfg.seed},
        "diagnostics": {"max_rhat": max_rhat, "rhat_limit": RHAT_LIMIT, "converged": bool(max_rhat <= RHAT_LIMIT)},
        "warnings": sorted({str(w.message) for w in caught}),
    }
    out = layout.fit(dataset)
    write_json(out / "report.json", report)
    atomic_write(out / "draws.csv", with_header(draws_csv(chains, spec.names), cfg.provenance()))
    log.info("fit %s: K label %s, max R-hat %.4f, ppc p %.3f", dataset, bf.label, max_rhat, ppc.p_value)
    if not max_rhat <= RHAT_LIMIT:
        raise ConvergenceFailure(f"max R-hat {max_rhat:.3f} exceeds {RHAT_LIMIT}; diagnostics written to {out}")
    return report


# ---- classify ------------------------------------------------------------------------

def cmd_classify(cfg: PipelineConfig, layout: Layout, dataset: str = "all") -> dict:
    if dataset not in ("all", "pre"):
        raise DataError(f"classify supports datasets 'all' and 'pre', not {dataset!r}")
    features = tuple(cfg.data["model"]["features"])
    m = _matrix(layout, dataset, features)
    X, y = m.values, m.target
    fc = cfg.data["forest"]
    out = layout.classify(dataset)
    config = cfg.fixed_forest()
    searched = config is None
    try:
        if searched:
            train, _ = split_train_test(y, fc["train_fraction"], cfg.seed)
            grid = grid_search(X[train], y[train], cfg.grid(), fc["folds"], cfg.seed, fc["metric"], cfg.threads)
            atomic_write(out / "cv.csv", with_header(grid.csv(), cfg.provenance()))
            config = grid.best
        runs = repeated_runs(X, y, config, fc["runs"], cfg.seed, fc["train_fraction"], cfg.threads, keep_models=True)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    # the run-0 forest stands in for the fitted model; names are attached for the summary
    model = runs.models[0]
    model.feature_names = features
    table = [{"metric": k, "mvr": BENCHMARK[k], "mean": runs.mean[k], "sd": runs.sd[k]} for k in METRICS]
    report = {
        **cfg.provenance(),
        "dataset": dataset,
        "n_obs": m.n,
        "grid_searched": searched,
        "config": config.to_dict(),
        "table": table,
        "accuracy": {"mean": runs.mean["accuracy"], "sd": runs.sd["accuracy"],
                     "note": "naive accuracy; compare with majority_class_share"},
        "majority_class_share": float(max(y.mean(), 1 - y.mean())),
        "runs": runs.to_dict()["runs"],
        "model": {**model.summary(), "trained_on": "run 0 training split"},
    }
    write_json(out / "report.json", report)
    atomic_write(out / "runs.csv", with_header(runs.csv(), cfg.provenance()))
    if cfg.data["forest"].get("save_model"):
        atomic_write(out / "model.json", model.dumps())
    log.info("classify %s: F1 %.3f (sd %.3f)", dataset, runs.mean["f1"] or float("nan"), runs.sd["f1"] or 0.0)
    return report


# ---- filters ---------------------------------------------------------------------------

def _filter_test(posts, people, name: str) -> dict:
    group = {p.id: p.group for p in people}
    pairs = [(q.filter_name, group[q.participant_id]) for q in posts
             if q.participant_id in group and q.has_filter]
    table = ContingencyTable.from_pairs(pairs)
    if len(table.row_labels) < 2:
        raise DataError(f"{name}: need at least two filter categories, found {list(table.row_labels)}")
    res = chi2_independence(table)
    bars = [{"filter": r, "group": c, "observed": o, "expected": e, "difference": d} for r, c, o, e, d in res.bars()]
    return {"chi2": res.statistic, "df": res.df, "p": res.p_value, "n_posts": len(pairs), "bars": bars}


def cmd_filters(cfg: PipelineConfig, layout: Layout) -> dict:
    people, posts, _ = _load_cohort(cfg, layout)
    results = {"all": _filter_test(posts, people, "all"),
               "pre": _filter_test(pre_diagnosis_posts(posts, people), people, "pre")}
    report = {**cfg.provenance(), "datasets": results}
    write_json(layout.filters / "report.json", report)
    lines = ["dataset,filter,group,observed,expected,difference"]
    for ds, r in results.items():
        lines += [f"{ds},{b['filter']},{b['group']},{b['observed']:g},{b['expected']!r},{b['difference']!r}"
                  for b in r["bars"]]
    atomic_write(layout.filters / "bars.csv", with_header("\n".join(lines) + "\n", cfg.provenance()))
    log.info("filters: chi2 all %.1f (p %.3g), pre %.1f (p %.3g)", results["all"]["chi2"], results["all"]["p"],
             results["pre"]["chi2"], results["pre"]["p"])
    return report


def load_json_or_none(path: Path):
    return read_json(path) if path.exists() else None
