"""Admission, user-day aggregation, dataset splits and feature matrices."""

from __future__ import annotations

import csv
import datetime as dt
import io
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .records import RATING_CATEGORIES, Participant, Post, Rating, post_key

MIN_POSTS = 5
CESD_CUTOFF = 21  # depressed participants need a score above this

COMPUTATIONAL_FEATURES = (
    "hue", "saturation", "brightness", "comments", "likes", "posts_per_day",
    "has_filter", "has_face", "face_count",
)
RATING_FEATURES = RATING_CATEGORIES


# ---- admission -------------------------------------------------------------

@dataclass(frozen=True)
class Admission:
    admitted: bool
    reason: Optional[str] = None  # "min_posts" or "cesd" when excluded


def admit_participant(p: Participant, post_count: int) -> Admission:
    if post_count < MIN_POSTS:
        return Admission(False, "min_posts")
    if p.depressed and p.cesd_score <= CESD_CUTOFF:
        return Admission(False, "cesd")
    return Admission(True)


def admit_cohort(participants, posts):
    """Split participants into admitted ids and an ``{id: reason}`` exclusion map."""
    counts = defaultdict(int)
    for post in posts:
        counts[post.participant_id] += 1
    admitted, excluded = [], {}
    for p in participants:
        a = admit_participant(p, counts[p.id])
        if a.admitted:
            admitted.append(p.id)
        else:
            excluded[p.id] = a.reason
    return admitted, excluded


# ---- user-days -------------------------------------------------------------

@dataclass(frozen=True)
class UserDay:
    participant_id: str
    date: dt.date
    target: str
    posts_per_day: int
    mean_hue: float
    mean_saturation: float
    mean_brightness: float
    comments: float
    likes: float
    filtered_count: int
    face_post_count: int
    mean_face_count: float
    ratings: Optional[tuple] = None  # mean happy/sad/likable/interesting over rated posts
    rated_posts: int = 0

    def __post_init__(self):
        if self.posts_per_day < 1:
            raise ValueError("posts_per_day must be >= 1")
        if not (0 <= self.filtered_count <= self.posts_per_day and 0 <= self.face_post_count <= self.posts_per_day):
            raise ValueError("filtered_count and face_post_count must lie in [0, posts_per_day]")

    @property
    def key(self) -> str:
        return f"{self.participant_id}@{self.date.isoformat()}"

    def feature(self, name: str) -> float:
        if name in RATING_FEATURES:
            if self.ratings is None:
                raise KeyError(f"{self.key}: no rated posts")
            return self.ratings[RATING_FEATURES.index(name)]
        return {
            "hue": self.mean_hue, "saturation": self.mean_saturation, "brightness": self.mean_brightness,
            "comments": self.comments, "likes": self.likes, "posts_per_day": float(self.posts_per_day),
            "has_filter": float(self.filtered_count), "has_face": float(self.face_post_count),
            "face_count": self.mean_face_count,
        }[name]


@dataclass
class AggregationResult:
    user_days: list
    skipped: list = field(default_factory=list)  # (post key, reason)


def aggregate_user_days(posts, participants, post_ratings: Optional[dict] = None) -> AggregationResult:
    """One observation per (participant, UTC calendar date).

    HSV, likes, comments and face count are per-post means; filtered and
    face posts are counts. ``post_ratings`` maps post key -> mean rating
    tuple; when given, each day also carries the mean over its rated posts.
    Posts without features, or from unknown participants, are skipped and
    reported.
    """
    groups = {p.id: p.group for p in participants}
    buckets = defaultdict(list)
    skipped = []
    for i, post in enumerate(posts):
        key = post_key(post, i)
        if post.participant_id not in groups:
            skipped.append((key, "unknown participant"))
            continue
        if post.features is None:
            skipped.append((key, "missing features"))
            continue
        buckets[(post.participant_id, post.date)].append((key, post))

    days = []
    for (pid, date) in sorted(buckets):
        items = buckets[(pid, date)]
        ps = [p for _, p in items]
        f = np.array([[p.features.mean_hue, p.features.mean_saturation, p.features.mean_brightness,
                       p.comment_count, p.like_count, p.features.face_count] for p in ps], dtype=np.float64)
        m = f.mean(axis=0)
        ratings, n_rated = None, 0
        if post_ratings:
            rated = [post_ratings[k] for k, _ in items if k in post_ratings]
            if rated:
                ratings = tuple(float(v) for v in np.mean(rated, axis=0))
                n_rated = len(rated)
        days.append(UserDay(
            participant_id=pid, date=date, target=groups[pid], posts_per_day=len(ps),
            mean_hue=float(m[0]), mean_saturation=float(m[1]), mean_brightness=float(m[2]),
            comments=float(m[3]), likes=float(m[4]),
            filtered_count=sum(p.has_filter for p in ps),
            face_post_count=sum(p.features.has_face for p in ps),
            mean_face_count=float(m[5]), ratings=ratings, rated_posts=n_rated,
        ))
    return AggregationResult(days, skipped)


def split_pre_diagnosis(user_days, participants) -> list:
    """All healthy days plus depressed days strictly before the diagnosis date."""
    by_id = {p.id: p for p in participants}
    out = []
    for d in user_days:
        p = by_id[d.participant_id]
        if not p.depressed or d.date < p.diagnosis_date:
            out.append(d)
    return out


def pre_diagnosis_posts(posts, participants) -> list:
    by_id = {p.id: p for p in participants}
    return [q for q in posts if q.participant_id in by_id
            and (not by_id[q.participant_id].depressed or q.date < by_id[q.participant_id].diagnosis_date)]


# ---- ratings -------------------------------------------------------------

RATING_WINDOW = dt.timedelta(days=365)
RATING_SUBSET_SIZE = 100


def select_rating_subset(posts, participants, size: int = RATING_SUBSET_SIZE) -> list:
    """Keys of the posts chosen for rating.

    Depressed: posts dated within a year before diagnosis and strictly
    before it, the ``size`` closest to the diagnosis. Healthy: the ``size``
    most recent posts before the participation date (all posts when no
    participation date is recorded).
    """
    by_id = {p.id: p for p in participants}
    per_user = defaultdict(list)
    for i, post in enumerate(posts):
        if post.participant_id in by_id:
            per_user[post.participant_id].append((post.timestamp, post_key(post, i)))
    chosen = []
    for pid in sorted(per_user):
        p = by_id[pid]
        items = per_user[pid]
        if p.depressed:
            cutoff = dt.datetime.combine(p.diagnosis_date, dt.time(), tzinfo=dt.timezone.utc)
            items = [it for it in items if cutoff - RATING_WINDOW <= it[0] < cutoff]
        elif p.participation_date is not None:
            cutoff = dt.datetime.combine(p.participation_date, dt.time(), tzinfo=dt.timezone.utc)
            items = [it for it in items if it[0] < cutoff]
        items.sort(key=lambda it: (it[0], it[1]))
        chosen.extend(k for _, k in items[-size:] if size > 0)
    return chosen


MIN_RATERS = 3


@dataclass
class RatingAggregate:
    means: dict                # post key -> (happy, sad, likable, interesting)
    counts: dict               # post key -> number of ratings
    flagged: list              # posts with fewer than MIN_RATERS ratings (kept)
    excluded: list = field(default_factory=list)  # requested posts with no ratings


def aggregate_ratings(ratings, post_keys=None) -> RatingAggregate:
    """Arithmetic mean of each rating category across raters, per post."""
    acc = defaultdict(list)
    for r in ratings:
        acc[r.post_id].append(r.values())
    means = {k: tuple(float(v) for v in np.mean(vals, axis=0)) for k, vals in acc.items()}
    counts = {k: len(v) for k, v in acc.items()}
    flagged = sorted(k for k, n in counts.items() if n < MIN_RATERS)
    excluded = sorted(k for k in (post_keys or []) if k not in acc)
    return RatingAggregate(means, counts, flagged, excluded)


# ---- feature matrices --------------------------------------------------------

@dataclass(frozen=True)
class FeatureMatrix:
    ids: tuple
    feature_names: tuple
    values: np.ndarray
    target: np.ndarray       # 1 = depressed, 0 = healthy
    means: Optional[np.ndarray] = None
    sds: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        t = np.asarray(self.target, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != len(self.feature_names):
            raise ValueError(f"values shape {v.shape} does not match {len(self.feature_names)} features")
        if v.shape[0] != t.shape[0] or v.shape[0] != len(self.ids):
            raise ValueError("ids, values and target must have the same number of rows")
        if not np.isin(t, (0, 1)).all():
            raise ValueError("target must be 0/1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "target", t)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def standardized(self) -> bool:
        return self.means is not None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]

    def select(self, names) -> "FeatureMatrix":
        idx = []
        for n in names:
            if n not in self.feature_names:
                raise KeyError(f"unknown feature {n!r}")
            idx.append(self.feature_names.index(n))
        return FeatureMatrix(self.ids, tuple(names), self.values[:, idx], self.target,
                             None if self.means is None else self.means[idx],
                             None if self.sds is None else self.sds[idx])

    def rows(self, index) -> "FeatureMatrix":
        index = np.asarray(index)
        return replace(self, ids=tuple(self.ids[i] for i in index), values=self.values[index],
                       target=self.target[index])

    def inverse(self) -> np.ndarray:
        """Values on the original scale."""
        if not self.standardized:
            return self.values.copy()
        return self.values * self.sds + self.means


def build_feature_matrix(user_days, features=COMPUTATIONAL_FEATURES) -> FeatureMatrix:
    days = list(user_days)
    if any(f in RATING_FEATURES for f in features):
        days = [d for d in days if d.ratings is not None]
    vals = np.array([[d.feature(f) for f in features] for d in days], dtype=np.float64).reshape(len(days), len(features))
    return FeatureMatrix(tuple(d.key for d in days), tuple(features), vals,
                         np.array([d.target == "depressed" for d in days], dtype=np.int64))


def standardize(m: FeatureMatrix) -> FeatureMatrix:
    """Per-column z-score with the population (1/n) sd; keeps means/sds for inversion."""
    x = m.inverse() if m.standardized else m.values
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    for j, s in enumerate(sd):
        # relative test so huge-valued constant columns are still caught
        if not s > 1e-12 * max(1.0, abs(mu[j])):
            raise ValueError(f"column {m.feature_names[j]!r} has zero variance")
    z = (x - mu) / sd
    # a second centring pass removes the rounding residue of the first
    z -= z.mean(axis=0)
    return FeatureMatrix(m.ids, m.feature_names, z, m.target, mu, sd)


def matrix_to_csv(m: FeatureMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", *m.feature_names, "target"])
    for i, row in enumerate(m.values):
        w.writerow([m.ids[i], *(repr(float(v)) for v in row), int(m.target[i])])
    return buf.getvalue()


def read_matrix_csv(path) -> FeatureMatrix:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        # '#' lines carry provenance comments; keep real line numbers for errors
        numbered = [(i, ln) for i, ln in enumerate(fh, start=1) if not ln.startswith("#")]
    rows = list(csv.reader(ln for _, ln in numbered))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2 or header[-1] != "target" or header[0] != "id":
        raise ValueError(f"{path}:{numbered[0][0]}: header must start with 'id' and end with 'target'")
    names = tuple(header[1:-1])
    ids, vals, target = [], [], []
    for (lineno, _), r in zip(numbered[1:], rows[1:]):
        if len(r) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, got {len(r)}")
        try:
            vals.append([float(v) for v in r[1:-1]])
            t = int(r[-1])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        if t not in (0, 1):
            raise ValueError(f"{path}:{lineno}: target must be 0 or 1")
        ids.append(r[0])
        target.append(t)
    return FeatureMatrix(tuple(ids), names, np.array(vals, dtype=np.float64).reshape(len(ids), len(names)),
                         np.array(target, dtype=np.int64))


# ---- summary statistics ----------------------------------------------------------

def _post_stats(counts):
    a = np.asarray(counts, dtype=np.float64)
    if a.size == 0:
        return {"users": 0, "posts": 0, "mean": None, "sd": None, "median": None}
    return {
        "users": int(a.size), "posts": int(a.sum()), "mean": float(a.mean()),
        "sd": float(a.std(ddof=1)) if a.size > 1 else None, "median": float(np.median(a)),
    }


def summary_stats(participants, posts) -> dict:
    """Users, posts and mean/sd/median posts per user, overall and per group."""
    counts = defaultdict(int)
    for q in posts:
        counts[q.participant_id] += 1
    out = {"total": _post_stats([counts[p.id] for p in participants])}
    for g in ("depressed", "healthy"):
        out[g] = _post_stats([counts[p.id] for p in participants if p.group == g])
    return out


def dataset_counts(user_days) -> dict:
    n = len(user_days)
    dep = sum(d.target == "depressed" for d in user_days)
    return {"observations": n, "depressed": dep, "healthy": n - dep,
            "depressed_share": dep / n if n else None}
