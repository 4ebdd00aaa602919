"""Synthetic cohorts with planted group differences.

Group-level targets follow the published descriptive tables: per-user post
totals and their skew, user-day posting rates, and per-feature group means
and spreads. ``effect_scale`` moves the depressed group along the line from
the healthy values (0, a null cohort) through the tabulated depressed
values (1) and beyond (> 1, an amplified effect). Means are interpolated on
a link scale (logit for proportions and unit-interval means, log for
positive rates), so every scale gives valid parameters.

Everything is drawn from one ``numpy.random.Generator(PCG64(seed))`` in a
fixed order, so a seed fully determines the output on every platform.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..imaging.features import ImageFeatures
from .records import (
    NO_FILTER, RATING_CATEGORIES, Participant, Post, Rating, format_timestamp, participant_to_dict,
    post_to_dict, rating_to_dict,
)

# healthy -> depressed targets, (mean, sd); HSV are per-photo means in [0, 1]
HSV_TARGETS = {
    "hue": ((0.338, 0.157), (0.345, 0.162)),
    "saturation": ((0.347, 0.155), (0.338, 0.157)),
    "brightness": ((0.547, 0.145), (0.535, 0.138)),
}
COUNT_TARGETS = {  # per post
    "comments": ((0.992, 2.013), (1.077, 2.150)),
    "likes": ((18.939, 34.214), (16.168, 34.874)),
}
# extra posts per posting day (a day has 1 + Poisson(rate) posts)
POSTING_RATE = (0.667, 0.875)
P_FILTER = (0.523, 0.442)
P_FACE = (0.369, 0.410)
EXTRA_FACES = (0.688, 0.539)  # a face photo shows 1 + Poisson(rate) faces

FILTERS = (
    "Amaro", "Clarendon", "Crema", "Gingham", "Hefe", "Hudson", "Inkwell", "Juno", "Lark", "Lo-fi",
    "Ludwig", "Mayfair", "Nashville", "Perpetua", "Reyes", "Rise", "Sierra", "Slumber", "Valencia",
    "X-Pro II",
)
# per-filter tilt (log-odds) applied to the depressed group's filter choice at scale 1
FILTER_TILT = {"Inkwell": 1.0, "Valencia": -0.8, "Hefe": 0.25, "Crema": -0.2, "Lark": -0.25}

RATING_TARGETS = {  # per post latent (mean, sd), healthy -> depressed
    "happy": ((2.511, 1.109), (2.300, 1.042)),
    "sad": ((0.757, 0.614), (0.840, 0.598)),
    "likable": ((2.514, 0.952), (2.393, 0.918)),
    "interesting": ((2.367, 0.859), (2.316, 0.816)),
}

COLLECTION_END = dt.date(2016, 4, 6)
COLLECTION_START = dt.date(2016, 2, 1)


@dataclass(frozen=True)
class CohortSpec:
    n_depressed: int = 71
    n_healthy: int = 95
    posts_depressed: int = 24_811
    posts_healthy: int = 19_139
    # log-sd of the lognormal post-count weights (skew: median well below mean)
    posts_log_sd: tuple = (1.3, 1.2)  # (healthy, depressed)
    min_posts: int = 5
    n_subthreshold: int = 0  # extra depressed participants with CES-D <= 21, excluded at admission
    effect_scale: float = 1.0
    diagnosis_quantile: tuple = (0.33, 0.73)
    mean_gap_days: float = 2.0  # mean spacing between consecutive posting days
    with_ratings: bool = True
    raters_per_post: tuple = (3, 5)
    rater_pool: int = 200
    rater_noise: float = 1.2  # rater noise sd as a multiple of the latent sd

    def validate(self):
        for name in ("n_depressed", "n_healthy", "posts_depressed", "posts_healthy", "min_posts", "n_subthreshold",
                     "rater_pool"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_depressed + self.n_healthy < 1:
            raise ValueError("cohort needs at least one participant")
        if self.posts_depressed < self.min_posts * self.n_depressed:
            raise ValueError("posts_depressed too small for min_posts per user")
        if self.posts_healthy < self.min_posts * self.n_healthy:
            raise ValueError("posts_healthy too small for min_posts per user")
        if any(s < 0 for s in self.posts_log_sd):
            raise ValueError("posts_log_sd must be >= 0")
        if self.effect_scale < 0:
            raise ValueError("effect_scale must be >= 0")
        lo, hi = self.diagnosis_quantile
        if not 0 < lo <= hi < 1:
            raise ValueError("diagnosis_quantile must satisfy 0 < lo <= hi < 1")
        if self.mean_gap_days < 1:
            raise ValueError("mean_gap_days must be >= 1")
        if not 1 <= self.raters_per_post[0] <= self.raters_per_post[1] <= max(self.rater_pool, 1):
            raise ValueError("raters_per_post must satisfy 1 <= lo <= hi <= rater_pool")
        if self.rater_noise < 0:
            raise ValueError("rater_noise must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "CohortSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown cohort spec fields: {sorted(unknown)}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        spec = cls(**d)
        spec.validate()
        return spec

    @classmethod
    def desk(cls, **kw) -> "CohortSpec":
        """Small cohort: 20 users, 600 posts."""
        base = dict(n_depressed=10, n_healthy=10, posts_depressed=300, posts_healthy=300)
        base.update(kw)
        return cls(**base)


@dataclass
class Cohort:
    participants: list
    posts: list
    ratings: list
    truth: dict = field(default_factory=dict)

    def jsonl(self) -> dict:
        """Serialized files keyed by name; byte-stable for a given seed."""
        from .records import dumps_jsonl
        return {
            "participants.jsonl": dumps_jsonl(participant_to_dict(p) for p in self.participants),
            "posts.jsonl": dumps_jsonl(post_to_dict(p) for p in self.posts),
            "ratings.jsonl": dumps_jsonl(rating_to_dict(r) for r in self.ratings),
            "truth.json": json.dumps(self.truth, sort_keys=True, indent=1) + "\n",
        }


def _logit(p):
    return math.log(p / (1 - p))


def _expit(x):
    return 1 / (1 + math.exp(-x))


def _toward(h, d, s, link):
    if link == "logit":
        return _expit(_logit(h) + s * (_logit(d) - _logit(h)))
    if link == "log":
        return math.exp(math.log(h) + s * (math.log(d) - math.log(h)))
    return h + s * (d - h)


def group_parameters(effect_scale: float) -> dict:
    """Per-group generating parameters; index 0 healthy, 1 depressed."""
    s = effect_scale
    par = {}
    for k, ((hm, hs), (dm, ds)) in HSV_TARGETS.items():
        par[k] = {"mean": (hm, _toward(hm, dm, s, "logit")), "sd": (hs, ds)}
    for k, ((hm, hs), (dm, ds)) in COUNT_TARGETS.items():
        par[k] = {"mean": (hm, _toward(hm, dm, s, "log")), "sd": (hs, _toward(hs, ds, s, "log"))}
    par["posting_rate"] = (POSTING_RATE[0], _toward(*POSTING_RATE, s, "log"))
    par["p_filter"] = (P_FILTER[0], _toward(*P_FILTER, s, "logit"))
    par["p_face"] = (P_FACE[0], _toward(*P_FACE, s, "logit"))
    par["extra_faces"] = (EXTRA_FACES[0], _toward(*EXTRA_FACES, s, "log"))
    tilt = np.array([FILTER_TILT.get(f, 0.0) for f in FILTERS])
    par["filter_probs"] = (_softmax(np.zeros(len(FILTERS))), _softmax(s * tilt))
    for k, ((hm, hs), (dm, ds)) in RATING_TARGETS.items():
        par["rating_" + k] = {"mean": (hm, min(max(_toward(hm, dm, s, "linear"), 0.0), 5.0)), "sd": (hs, ds)}
    return par


def _softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def _allocate(total, n, minimum, log_sd, rng):
    """Post counts per user summing exactly to ``total`` with a lognormal skew."""
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    w = rng.lognormal(0.0, log_sd, size=n)
    spare = total - minimum * n
    raw = spare * w / w.sum()
    counts = np.floor(raw).astype(np.int64)
    # hand out the remainder by largest fractional part, ties to lower index
    rest = spare - counts.sum()
    order = np.lexsort((np.arange(n), -(raw - counts)))
    counts[order[:rest]] += 1
    return counts + minimum


def _beta(rng, mean, sd, size):
    # method of moments; sd is capped so both shape parameters stay positive
    var = min(sd * sd, 0.95 * mean * (1 - mean))
    k = mean * (1 - mean) / var - 1
    return rng.beta(mean * k, (1 - mean) * k, size=size)


def _negbin(rng, mean, sd, size):
    var = max(sd * sd, mean * 1.0001)
    r = mean * mean / (var - mean)
    lam = rng.gamma(r, mean / r, size=size)
    return rng.poisson(lam)


def _cesd_responses(rng, want_above_cutoff: bool):
    while True:
        p = rng.dirichlet([1, 1, 1.5, 2.5]) if want_above_cutoff else rng.dirichlet([3, 2, 1, 0.5])
        resp = [int(v) for v in rng.choice(4, size=20, p=p)]
        from .records import score_cesd
        if (score_cesd(resp) > 21) == want_above_cutoff:
            return resp


def _timeline(rng, n_posts, rate, mean_gap, end):
    """Dates and per-day counts for one user, ending on or before ``end``."""
    per_day = []
    left = n_posts
    while left > 0:
        c = min(1 + int(rng.poisson(rate)), left)
        per_day.append(c)
        left -= c
    n_days = len(per_day)
    gaps = 1 + rng.geometric(1.0 / mean_gap, size=max(n_days - 1, 0)) - 1
    offsets = np.concatenate([[0], np.cumsum(gaps)])
    last = end - dt.timedelta(days=int(rng.integers(0, 30)))
    start = last - dt.timedelta(days=int(offsets[-1]))
    dates = [start + dt.timedelta(days=int(o)) for o in offsets]
    return dates, per_day


def generate_cohort(spec: CohortSpec = CohortSpec(), seed: int = 0) -> Cohort:
    spec.validate()
    rng = np.random.default_rng(seed)
    par = group_parameters(spec.effect_scale)

    counts = {
        1: _allocate(spec.posts_depressed, spec.n_depressed, spec.min_posts, spec.posts_log_sd[1], rng),
        0: _allocate(spec.posts_healthy, spec.n_healthy, spec.min_posts, spec.posts_log_sd[0], rng),
    }
    roster = [(f"d{i:03d}", 1, int(c), True) for i, c in enumerate(counts[1])]
    roster += [(f"s{i:03d}", 1, int(c), False) for i, c in
               enumerate(_allocate(spec.min_posts * 20 * spec.n_subthreshold, spec.n_subthreshold, spec.min_posts,
                                   spec.posts_log_sd[1], rng))]
    roster += [(f"h{i:03d}", 0, int(c), True) for i, c in enumerate(counts[0])]

    participants, posts, ratings = [], [], []
    rated_latent = []
    for pid, g, n_posts, above in roster:
        dates, per_day = _timeline(rng, n_posts, par["posting_rate"][g], spec.mean_gap_days, COLLECTION_END)
        joined = COLLECTION_START + dt.timedelta(days=int(rng.integers(0, (COLLECTION_END - COLLECTION_START).days + 1)))
        age = float(np.clip(round(rng.normal(28.8 if g else 30.7, 7.0)), 19, 55))
        if g == 1:
            q = rng.uniform(*spec.diagnosis_quantile)
            diag = dates[min(int(q * len(dates)), len(dates) - 1)]
            from .records import score_cesd
            participants.append(Participant(pid, "depressed", diagnosis_date=diag,
                                            cesd_score=score_cesd(_cesd_responses(rng, above)), age=age,
                                            participation_date=max(joined, dates[-1] + dt.timedelta(days=1))))
        else:
            participants.append(Participant(pid, "healthy", age=age,
                                            participation_date=max(joined, dates[-1] + dt.timedelta(days=1))))

        n = n_posts
        hue = _beta(rng, par["hue"]["mean"][g], par["hue"]["sd"][g], n)
        sat = _beta(rng, par["saturation"]["mean"][g], par["saturation"]["sd"][g], n)
        val = _beta(rng, par["brightness"]["mean"][g], par["brightness"]["sd"][g], n)
        comments = _negbin(rng, par["comments"]["mean"][g], par["comments"]["sd"][g], n)
        likes = _negbin(rng, par["likes"]["mean"][g], par["likes"]["sd"][g], n)
        filtered = rng.random(n) < par["p_filter"][g]
        filt_idx = rng.choice(len(FILTERS), size=n, p=par["filter_probs"][g])
        face = rng.random(n) < par["p_face"][g]
        faces = np.where(face, 1 + rng.poisson(par["extra_faces"][g], size=n), 0)
        seconds = rng.integers(0, 86_400, size=n)

        k = 0
        for date, c in zip(dates, per_day):
            secs = np.sort(seconds[k:k + c])
            for j in range(c):
                i = k + j
                ts = dt.datetime.combine(date, dt.time(), tzinfo=dt.timezone.utc) + dt.timedelta(seconds=int(secs[j]))
                feats = ImageFeatures(float(hue[i]), float(sat[i]), float(val[i]), int(faces[i]), bool(faces[i] > 0))
                posts.append(Post(pid, ts, int(likes[i]), int(comments[i]),
                                  FILTERS[filt_idx[i]] if filtered[i] else NO_FILTER,
                                  features=feats, id=f"{pid}-{i:05d}"))
            k += c

    if spec.with_ratings:
        from .dataset import select_rating_subset
        chosen = select_rating_subset(posts, participants)
        group_of = {p.id: int(p.depressed) for p in participants}
        lo, hi = spec.raters_per_post
        for key in chosen:
            g = group_of[key.split("-")[0]]
            latent = [rng.normal(par["rating_" + c]["mean"][g], 0.8 * par["rating_" + c]["sd"][g])
                      for c in RATING_CATEGORIES]
            n_raters = int(rng.integers(lo, hi + 1))
            raters = rng.choice(spec.rater_pool, size=n_raters, replace=False)
            for r in raters:
                vals = [float(np.clip(round(m + rng.normal(0, spec.rater_noise * 0.8 * par["rating_" + c]["sd"][g]), 2),
                                      0.0, 5.0)) for m, c in zip(latent, RATING_CATEGORIES)]
                ratings.append(Rating(key, f"r{int(r):04d}", *vals))

    truth = {
        "seed": seed,
        "spec": asdict(spec),
        "parameters": _jsonable(par),
        "filters": list(FILTERS),
        "standardized_effects": standardized_effects(par),
    }
    return Cohort(participants, posts, ratings, truth)


def standardized_effects(par) -> dict:
    """Per-post planted difference (depressed - healthy) in pooled-sd units."""
    out = {}
    for k in ("hue", "saturation", "brightness", "comments", "likes"):
        (h, d), (sh, sd) = par[k]["mean"], par[k]["sd"]
        out[k] = (d - h) / math.sqrt((sh * sh + sd * sd) / 2)
    for k in ("p_filter", "p_face"):
        h, d = par[k]
        out[k] = (d - h) / math.sqrt((h * (1 - h) + d * (1 - d)) / 2)
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [float(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x
