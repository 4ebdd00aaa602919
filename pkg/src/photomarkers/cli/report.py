"""Assemble every stage's output into one bundle (JSON plus a plain-text rendering)."""

from __future__ import annotations

import logging

from ..cohort import COMPUTATIONAL_FEATURES, RATING_FEATURES, read_matrix_csv, read_ratings
from ..forest import METRICS
from ..stats import correlation_matrix, interrater_agreement
from .artifacts import Layout, atomic_write, read_json, write_json
from .config import BENCHMARK, PipelineConfig

log = logging.getLogger("photomarkers")

SECTIONS = ("dataset_summary", "bayesian", "frequentist", "bayes_factors", "classifier", "filters",
            "correlations", "agreement")
FIT_DATASETS = ("all", "pre", "ratings")


def _prov(doc) -> dict:
    return {"config_hash": doc.get("config_hash"), "seed": doc.get("seed")}


def _load(path):
    return read_json(path) if path.exists() else None


def _fits(layout: Layout) -> dict:
    return {d: r for d in FIT_DATASETS if (r := _load(layout.fit(d) / "report.json")) is not None}


def _order(fit_report) -> list:
    # canonical JSON sorts keys; restore the model's parameter order
    return ["intercept", *fit_report["features"]]


def _bayesian(fits: dict) -> dict:
    out = {}
    for d, r in fits.items():
        rows = []
        for name in _order(r):
            c = r["bayesian"]["coef"][name]
            rows.append({"name": name, "mean": c["mean"], "sd": c["sd"], "odds": c["odds"], "hpd95": c["hpd"]["0.95"],
                         "hpd_level": c["hpd_level"], "rhat": c["rhat"], "geweke_z": c["geweke_z"], "ess": c["ess"]})
        out[d] = {**_prov(r), "n_obs": r["n_obs"], "coef": rows, "acceptance_rate": r["bayesian"]["acceptance_rate"],
                  "max_rhat": r["diagnostics"]["max_rhat"]}
    return out


def _frequentist(fits: dict) -> dict:
    out = {}
    for d, r in fits.items():
        f = r["frequentist"]
        rows = [{"name": n, **f["coef"][n]} for n in _order(r)]
        out[d] = {**_prov(r), "n_obs": f["n_obs"], "converged": f["converged"], "pseudo_r2": f["pseudo_r2"],
                  "llr": f["llr"], "llr_pvalue": f["llr_pvalue"], "coef": rows, "warnings": f["warnings"]}
    return out


def _bayes_factors(fits: dict) -> dict:
    return {d: {**_prov(r), **r["bayes_factor"], "ppc_p": r["ppc"]["p"]} for d, r in fits.items()}


def _classifier(layout: Layout):
    reports = {d: r for d in ("all", "pre") if (r := _load(layout.classify(d) / "report.json")) is not None}
    if not reports:
        return None
    rows = []
    for m in METRICS:
        row = {"metric": m, "mvr": BENCHMARK[m]}
        for d, r in reports.items():
            cell = next(t for t in r["table"] if t["metric"] == m)
            row[d] = {"mean": cell["mean"], "sd": cell["sd"]}
        rows.append(row)
    return {"table": rows, "datasets": {d: {**_prov(r), "n_obs": r["n_obs"], "config": r["config"],
                                            "grid_searched": r["grid_searched"],
                                            "majority_class_share": r["majority_class_share"]}
                                        for d, r in reports.items()},
            "note": "MVR column is a display-only benchmark"}


def _correlations(layout: Layout):
    out = {}
    for d, cols in (("all", COMPUTATIONAL_FEATURES), ("pre", COMPUTATIONAL_FEATURES), ("ratings", RATING_FEATURES)):
        p = layout.matrix(d)
        if not p.exists():
            continue
        m = read_matrix_csv(p)
        try:
            t = correlation_matrix(m, cols)
        except ValueError as exc:
            out[d] = {"error": str(exc)}
            continue
        out[d] = {"columns": list(t.columns), "n": t.n, "rows": [{"name": c, "r": r} for c, r in t.rows()]}
    return out or None


def _agreement(cfg: PipelineConfig, layout: Layout):
    p = cfg.path(cfg.data["inputs"]["ratings"]) or layout.cohort / "ratings.jsonl"
    if not p.exists():
        return None
    ratings = read_ratings(p)
    if not ratings:
        return None
    try:
        rep = interrater_agreement(ratings, n_folds=cfg.data["agreement"]["folds"], seed=cfg.seed)
    except ValueError as exc:
        return {"error": str(exc)}
    return rep.to_dict()


def build_bundle(cfg: PipelineConfig, layout: Layout) -> dict:
    fits = _fits(layout)
    summary = _load(layout.aggregate / "summary.json")
    filters = _load(layout.filters / "report.json")
    found = {
        "dataset_summary": summary and {**_prov(summary), "table": summary["table"], "datasets": summary["datasets"],
                                        "excluded": len(summary["excluded"]), "skipped_posts": summary["skipped_posts"]},
        "bayesian": _bayesian(fits) or None,
        "frequentist": _frequentist(fits) or None,
        "bayes_factors": _bayes_factors(fits) or None,
        "classifier": _classifier(layout),
        "filters": filters and {**_prov(filters), "datasets": filters["datasets"]},
        "correlations": _correlations(layout),
        "agreement": _agreement(cfg, layout),
    }
    prov = cfg.provenance()
    sections, missing, warnings = {}, [], []
    for name in SECTIONS:
        body = found[name]
        if body is None:
            missing.append(name)
            warnings.append(f"section {name!r} missing: upstream output not found")
            continue
        sections[name] = {"config_hash": prov["config_hash"], "seed": prov["seed"], "content": body}
    hashes = _source_hashes(found)
    if any(h != prov["config_hash"] for h in hashes):
        warnings.append("some inputs were produced under a different config hash")
    for w in warnings:
        log.warning(w)
    return {**prov, "sections": sections, "missing_sections": missing, "warnings": warnings}


def _source_hashes(found: dict) -> set:
    out = set()

    def walk(x):
        if isinstance(x, dict):
            if "config_hash" in x and x["config_hash"] is not None:
                out.add(x["config_hash"])
            for v in x.values():
                walk(v)
        elif isinstance(x, list):
            for v in x:
                walk(v)
    walk(found)
    return out


# ---- text rendering ------------------------------------------------------------------

def _f(v, fmt=".3f"):
    return "n/a" if v is None else format(v, fmt)


def render_text(bundle: dict) -> str:
    s = bundle["sections"]
    out = [f"config {bundle['config_hash']}  seed {bundle['seed']}", ""]
    if "dataset_summary" in s:
        c = s["dataset_summary"]["content"]
        out.append("== dataset summary")
        out.append(f"{'':10s}{'users':>7s}{'posts':>8s}{'mean':>9s}{'sd':>9s}{'median':>8s}")
        for g in ("total", "depressed", "healthy"):
            t = c["table"][g]
            out.append(f"{g:10s}{t['users']:>7d}{t['posts']:>8d}{_f(t['mean'], '.1f'):>9s}{_f(t['sd'], '.1f'):>9s}"
                       f"{_f(t['median'], '.1f'):>8s}")
        for d, n in c["datasets"].items():
            out.append(f"{d}: {n['observations']} user-days, {n['depressed_share']:.1%} depressed")
        out.append("")
    for key, title in (("bayesian", "bayesian logit"), ("frequentist", "frequentist logit")):
        if key not in s:
            continue
        for d, r in s[key]["content"].items():
            out.append(f"== {title} ({d}, n={r['n_obs']})")
            if key == "bayesian":
                out.append(f"{'':16s}{'mean':>8s}{'sd':>8s}{'odds':>8s}{'hpd excl 0':>12s}{'rhat':>8s}")
                for c in r["coef"]:
                    lvl = f"{c['hpd_level']:.0%}" if c["hpd_level"] else "none"
                    out.append(f"{c['name']:16s}{c['mean']:8.3f}{c['sd']:8.3f}{c['odds']:8.3f}{lvl:>12s}"
                               f"{_f(c['rhat']):>8s}")
            else:
                out.append(f"{'':16s}{'coef':>8s}{'se':>8s}{'p':>10s}{'95% ci':>20s}")
                for c in r["coef"]:
                    ci = f"[{c['ci'][0]:.3f}, {c['ci'][1]:.3f}]"
                    out.append(f"{c['name']:16s}{c['coef']:8.3f}{c['se']:8.3f}{c['p']:10.3g}{ci:>20s}")
            out.append("")
    if "bayes_factors" in s:
        out.append("== bayes factors vs intercept-only")
        for d, r in s["bayes_factors"]["content"].items():
            k = "overflow" if r["K"] is None else f"{r['K']:.4g}"
            out.append(f"{d}: K={k} (log10 {r['log10_K']:.2f}) {r['label']}; ppc p={r['ppc_p']:.3f}")
        out.append("")
    if "classifier" in s:
        c = s["classifier"]["content"]
        ds = list(c["datasets"])
        out.append("== classifier (mu (sd) over runs)")
        out.append(f"{'':13s}{'MVR':>8s}" + "".join(f"{d:>18s}" for d in ds))
        for row in c["table"]:
            cells = "".join(f"{_f(row[d]['mean']) + ' (' + _f(row[d]['sd']) + ')':>18s}" for d in ds)
            out.append(f"{row['metric']:13s}{row['mvr']:8.3f}{cells}")
        out.append("")
    if "filters" in s:
        out.append("== filter usage chi-squared")
        for d, r in s["filters"]["content"]["datasets"].items():
            out.append(f"{d}: chi2={r['chi2']:.2f} df={r['df']} p={r['p']:.3g} ({r['n_posts']} filtered posts)")
        out.append("")
    if "correlations" in s:
        out.append("== correlations (lower triangle)")
        for d, t in s["correlations"]["content"].items():
            if "error" in t:
                out.append(f"{d}: {t['error']}")
                continue
            out.append(f"-- {d} (n={t['n']})")
            for row in t["rows"]:
                out.append(f"{row['name']:14s}" + "".join(f"{v:7.2f}" for v in row["r"]))
        out.append("")
    if "agreement" in s:
        a = s["agreement"]["content"]
        out.append("== inter-rater agreement")
        if "error" in a:
            out.append(a["error"])
        else:
            out.append(", ".join(f"{c} r={a['r'][c]:.3f}" for c in a["r"]) + f" ({a['n_photos']} photos)")
        out.append("")
    if bundle["missing_sections"]:
        out.append("missing sections: " + ", ".join(bundle["missing_sections"]))
    return "\n".join(out).rstrip() + "\n"


def cmd_report(cfg: PipelineConfig, layout: Layout) -> dict:
    bundle = build_bundle(cfg, layout)
    write_json(layout.report / "bundle.json", bundle)
    atomic_write(layout.report / "report.txt", render_text(bundle))
    log.info("report: %d sections, missing %s", len(bundle["sections"]), bundle["missing_sections"] or "none")
    return bundle
