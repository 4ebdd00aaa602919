"""Participant, post and rating records plus their JSON-lines readers.

Readers validate every record eagerly and raise :class:`RecordError`
naming the file, line and field of the first problem.
"""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..imaging.features import ImageFeatures

GROUPS = ("depressed", "healthy")
NO_FILTER = "Normal"
RATING_CATEGORIES = ("happy", "sad", "likable", "interesting")


class RecordError(ValueError):
    def __init__(self, message, source=None, line=None, field_name=None):
        self.source, self.line, self.field_name = source, line, field_name
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        if field_name:
            where += f"{field_name}: "
        super().__init__(where + message)


_RFC3339 = re.compile(
    r"^(\d{4})-(\d{2})-(\d{2})[Tt ](\d{2}):(\d{2}):(\d{2})(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$"
)


def parse_timestamp(text: str) -> dt.datetime:
    """RFC 3339 timestamp -> aware UTC datetime."""
    m = _RFC3339.match(text) if isinstance(text, str) else None
    if not m:
        raise ValueError(f"not an RFC 3339 timestamp: {text!r}")
    y, mo, d, h, mi, s = (int(v) for v in m.groups()[:6])
    frac = m.group(7)
    micro = int(round(float(frac) * 1e6)) if frac else 0
    off = m.group(8)
    if off in ("Z", "z"):
        tz = dt.timezone.utc
    else:
        sign = 1 if off[0] == "+" else -1
        tz = dt.timezone(sign * dt.timedelta(hours=int(off[1:3]), minutes=int(off[4:6])))
    micro = min(micro, 999_999)
    return dt.datetime(y, mo, d, h, mi, s, micro, tzinfo=tz).astimezone(dt.timezone.utc)


def format_timestamp(t: dt.datetime) -> str:
    return t.astimezone(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def score_cesd(responses) -> int:
    """Total CES-D score; items 4, 8, 12 and 16 are reverse-scored as 3 - raw."""
    responses = list(responses)
    if len(responses) != 20:
        raise ValueError(f"CES-D needs exactly 20 responses, got {len(responses)}")
    total = 0
    for item, raw in enumerate(responses, start=1):
        if isinstance(raw, bool) or not isinstance(raw, int) or not 0 <= raw <= 3:
            raise ValueError(f"CES-D item {item}: response {raw!r} outside 0..3")
        total += 3 - raw if item in (4, 8, 12, 16) else raw
    return total


@dataclass(frozen=True)
class Participant:
    id: str
    group: str
    diagnosis_date: Optional[dt.date] = None
    cesd_score: Optional[int] = None
    age: Optional[float] = None
    # date the participant joined the study; bounds the healthy rating subset
    participation_date: Optional[dt.date] = None

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ValueError(f"group must be one of {GROUPS}, got {self.group!r}")
        if self.group == "depressed" and (self.diagnosis_date is None or self.cesd_score is None):
            raise ValueError("depressed participants need diagnosis_date and cesd_score")
        if self.cesd_score is not None and not 0 <= self.cesd_score <= 60:
            raise ValueError(f"cesd_score {self.cesd_score} outside 0..60")

    @property
    def depressed(self) -> bool:
        return self.group == "depressed"


@dataclass(frozen=True)
class Post:
    participant_id: str
    timestamp: dt.datetime
    like_count: int
    comment_count: int
    filter_name: str = NO_FILTER
    image_ref: Optional[str] = None
    features: Optional[ImageFeatures] = None
    id: Optional[str] = None

    def __post_init__(self):
        if self.like_count < 0 or self.comment_count < 0:
            raise ValueError("like_count and comment_count must be >= 0")

    @property
    def has_filter(self) -> bool:
        return self.filter_name != NO_FILTER

    @property
    def date(self) -> dt.date:
        return self.timestamp.astimezone(dt.timezone.utc).date()


@dataclass(frozen=True)
class Rating:
    post_id: str
    rater_id: str
    happy: float
    sad: float
    likable: float
    interesting: float

    def __post_init__(self):
        for c in RATING_CATEGORIES:
            v = getattr(self, c)
            if not 0.0 <= v <= 5.0:
                raise ValueError(f"{c}={v} outside [0, 5]")

    def values(self):
        return tuple(getattr(self, c) for c in RATING_CATEGORIES)


# ---- JSON-lines --------------------------------------------------------------

def _iter_jsonl(path):
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise RecordError(f"invalid JSON ({exc.msg})", str(path), lineno) from None
            if not isinstance(obj, dict):
                raise RecordError("expected a JSON object", str(path), lineno)
            yield lineno, obj


class _Fields:
    """Typed field access that reports source:line: field on failure."""

    def __init__(self, obj, source, line):
        self.obj, self.source, self.line = obj, source, line

    def fail(self, name, msg):
        raise RecordError(msg, self.source, self.line, name)

    def get(self, name, required=True):
        if name not in self.obj or self.obj[name] is None:
            if required:
                self.fail(name, "missing required field")
            return None
        return self.obj[name]

    def string(self, name, required=True):
        v = self.get(name, required)
        if v is not None and not isinstance(v, str):
            self.fail(name, f"expected a string, got {v!r}")
        return v

    def count(self, name, required=True):
        v = self.get(name, required)
        if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 0):
            self.fail(name, f"expected a non-negative integer, got {v!r}")
        return v

    def number(self, name, required=True, lo=None, hi=None):
        v = self.get(name, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(name, f"expected a number, got {v!r}")
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            self.fail(name, f"value {v} outside [{lo}, {hi}]")
        return float(v)

    def date(self, name, required=True):
        v = self.string(name, required)
        if v is None:
            return None
        try:
            return dt.date.fromisoformat(v)
        except ValueError:
            self.fail(name, f"expected a YYYY-MM-DD date, got {v!r}")

    def timestamp(self, name):
        v = self.string(name)
        try:
            return parse_timestamp(v)
        except ValueError as exc:
            self.fail(name, str(exc))


def participant_from_dict(obj, source=None, line=None) -> Participant:
    f = _Fields(obj, source, line)
    group = f.string("group")
    if group not in GROUPS:
        f.fail("group", f"expected one of {GROUPS}, got {group!r}")
    score = f.get("cesd_score", required=False)
    responses = f.get("cesd_responses", required=False)
    if responses is not None:
        if not isinstance(responses, list):
            f.fail("cesd_responses", "expected a list of 20 integers")
        try:
            computed = score_cesd(responses)
        except ValueError as exc:
            f.fail("cesd_responses", str(exc))
        if score is not None and score != computed:
            f.fail("cesd_score", f"{score} disagrees with scored responses ({computed})")
        score = computed
    elif score is not None:
        score = f.count("cesd_score")
        if score > 60:
            f.fail("cesd_score", f"value {score} outside 0..60")
    diagnosis = f.date("diagnosis_date", required=False)
    if group == "depressed":
        if diagnosis is None:
            f.fail("diagnosis_date", "required for depressed participants")
        if score is None:
            f.fail("cesd_score", "depressed participants need cesd_score or cesd_responses")
    return Participant(
        id=f.string("id"), group=group, diagnosis_date=diagnosis, cesd_score=score,
        age=f.number("age", required=False, lo=0), participation_date=f.date("participation_date", required=False),
    )


def participant_to_dict(p: Participant) -> dict:
    d = {"id": p.id, "group": p.group}
    if p.diagnosis_date is not None:
        d["diagnosis_date"] = p.diagnosis_date.isoformat()
    if p.cesd_score is not None:
        d["cesd_score"] = p.cesd_score
    if p.age is not None:
        d["age"] = p.age
    if p.participation_date is not None:
        d["participation_date"] = p.participation_date.isoformat()
    return d


def post_from_dict(obj, source=None, line=None) -> Post:
    f = _Fields(obj, source, line)
    feats = f.get("features", required=False)
    if feats is not None:
        try:
            feats = ImageFeatures.from_dict(feats)
        except (KeyError, TypeError, ValueError) as exc:
            f.fail("features", f"invalid feature record ({exc})")
    filt = f.string("filter", required=False)
    return Post(
        participant_id=f.string("participant_id"), timestamp=f.timestamp("timestamp"),
        like_count=f.count("like_count"), comment_count=f.count("comment_count"),
        filter_name=NO_FILTER if filt is None else filt, image_ref=f.string("image_path", required=False),
        features=feats, id=f.string("id", required=False),
    )


def post_to_dict(p: Post) -> dict:
    d = {"participant_id": p.participant_id, "timestamp": format_timestamp(p.timestamp),
         "like_count": p.like_count, "comment_count": p.comment_count, "filter": p.filter_name}
    if p.id is not None:
        d["id"] = p.id
    if p.image_ref is not None:
        d["image_path"] = p.image_ref
    if p.features is not None:
        d["features"] = p.features.to_dict()
    return d


def rating_from_dict(obj, source=None, line=None) -> Rating:
    f = _Fields(obj, source, line)
    vals = {c: f.number(c, lo=0.0, hi=5.0) for c in RATING_CATEGORIES}
    return Rating(post_id=str(f.get("post_id")), rater_id=str(f.get("rater_id")), **vals)


def rating_to_dict(r: Rating) -> dict:
    d = {"post_id": r.post_id, "rater_id": r.rater_id}
    d.update({c: getattr(r, c) for c in RATING_CATEGORIES})
    return d


def read_participants(path) -> list:
    out, seen = [], set()
    for line, obj in _iter_jsonl(path):
        p = participant_from_dict(obj, str(path), line)
        if p.id in seen:
            raise RecordError(f"duplicate participant id {p.id!r}", str(path), line, "id")
        seen.add(p.id)
        out.append(p)
    return out


def read_posts(path) -> list:
    return [post_from_dict(obj, str(path), line) for line, obj in _iter_jsonl(path)]


def read_ratings(path) -> list:
    return [rating_from_dict(obj, str(path), line) for line, obj in _iter_jsonl(path)]


def post_key(post: Post, index: int) -> str:
    """Stable identifier: the record's own id, else participant and input position."""
    return post.id if post.id is not None else f"{post.participant_id}#{index}"


def dumps_jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)
