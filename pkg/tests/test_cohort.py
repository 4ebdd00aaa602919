import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from photomarkers.cohort import (
    COMPUTATIONAL_FEATURES, CohortSpec, FeatureMatrix, Participant, Post, Rating, RecordError, admit_cohort,
    aggregate_ratings, aggregate_user_days, build_feature_matrix, dataset_counts, generate_cohort,
    group_parameters, matrix_to_csv, parse_timestamp, pre_diagnosis_posts, read_matrix_csv, read_participants,
    read_posts, read_ratings, score_cesd, select_rating_subset, split_pre_diagnosis, standardize, summary_stats,
)
from photomarkers.cohort.records import dumps_jsonl, post_key, post_to_dict
from photomarkers.cohort.synth import _allocate
from photomarkers.imaging import ImageFeatures

UTC = dt.timezone.utc


def _post(pid, when, likes=1, comments=0, filt="Normal", hue=0.5, faces=0, pid_id=None):
    return Post(pid, when, likes, comments, filt, features=ImageFeatures(hue, 0.4, 0.6, faces, faces > 0), id=pid_id)


# ---- records ---------------------------------------------------------------

@pytest.mark.parametrize("text, expected", [
    ("2015-03-01T12:00:00Z", dt.datetime(2015, 3, 1, 12, tzinfo=UTC)),
    ("2015-03-01T23:30:00-02:00", dt.datetime(2015, 3, 2, 1, 30, tzinfo=UTC)),
    ("2015-03-01T00:00:00.250+01:00", dt.datetime(2015, 2, 28, 23, 0, 0, 250000, tzinfo=UTC)),
])
def test_parse_timestamp_to_utc(text, expected):
    assert parse_timestamp(text) == expected


@pytest.mark.parametrize("bad", ["2015-03-01", "2015-03-01T12:00:00", "yesterday", "2015-13-01T00:00:00Z"])
def test_parse_timestamp_rejects(bad):
    with pytest.raises(ValueError):
        parse_timestamp(bad)


def test_cesd_reverse_items():
    assert score_cesd([0] * 20) == 12          # four reversed items give 3 each
    assert score_cesd([3] * 20) == 48
    resp = [0] * 20
    resp[3] = 3                                # item 4 answered 3 scores 0
    assert score_cesd(resp) == 9


@given(st.lists(st.integers(0, 3), min_size=20, max_size=20))
def test_cesd_range(resp):
    s = score_cesd(resp)
    assert 0 <= s <= 60
    flipped = [3 - r for r in resp]
    assert s + score_cesd(flipped) == 60


@pytest.mark.parametrize("resp", [[0] * 19, [0] * 19 + [4], [0] * 19 + [True]])
def test_cesd_rejects(resp):
    with pytest.raises(ValueError):
        score_cesd(resp)


def test_reader_reports_line_and_field(tmp_path):
    p = tmp_path / "posts.jsonl"
    good = {"participant_id": "a", "timestamp": "2015-01-01T00:00:00Z", "like_count": 1, "comment_count": 0}
    bad = dict(good, like_count=-2)
    p.write_text(json.dumps(good) + "\n\n" + json.dumps(bad) + "\n")
    with pytest.raises(RecordError) as e:
        read_posts(p)
    assert e.value.line == 3 and e.value.field_name == "like_count"
    assert "posts.jsonl:3: like_count" in str(e.value)


def test_reader_rejects_broken_json_and_duplicates(tmp_path):
    p = tmp_path / "people.jsonl"
    p.write_text('{"id": "a", "group": "healthy"}\n{"id": \n')
    with pytest.raises(RecordError, match=":2:"):
        read_participants(p)
    p.write_text('{"id": "a", "group": "healthy"}\n{"id": "a", "group": "healthy"}\n')
    with pytest.raises(RecordError, match="duplicate"):
        read_participants(p)


def test_participant_responses_scored(tmp_path):
    p = tmp_path / "people.jsonl"
    rec = {"id": "d1", "group": "depressed", "diagnosis_date": "2015-06-01", "cesd_responses": [3] * 20}
    p.write_text(json.dumps(rec) + "\n")
    assert read_participants(p)[0].cesd_score == 48
    rec["cesd_score"] = 40
    p.write_text(json.dumps(rec) + "\n")
    with pytest.raises(RecordError, match="cesd_score"):
        read_participants(p)
    p.write_text(json.dumps({"id": "d2", "group": "depressed", "cesd_score": 30}) + "\n")
    with pytest.raises(RecordError, match="diagnosis_date"):
        read_participants(p)


def test_ratings_range(tmp_path):
    p = tmp_path / "r.jsonl"
    p.write_text(json.dumps({"post_id": "x", "rater_id": "r", "happy": 5.5, "sad": 0, "likable": 1,
                             "interesting": 1}) + "\n")
    with pytest.raises(RecordError, match="happy"):
        read_ratings(p)


def test_post_round_trip(tmp_path):
    post = _post("a", dt.datetime(2015, 1, 2, 3, 4, 5, tzinfo=UTC), 4, 2, "Inkwell", faces=2, pid_id="a-1")
    p = tmp_path / "posts.jsonl"
    p.write_text(dumps_jsonl([post_to_dict(post)]))
    assert read_posts(p) == [post]
    assert post_key(post, 7) == "a-1"
    assert post_key(Post("b", post.timestamp, 0, 0), 7) == "b#7"


# ---- admission and aggregation --------------------------------------------------

def test_admission_reasons():
    ppl = [
        Participant("d1", "depressed", dt.date(2015, 1, 1), 30),
        Participant("d2", "depressed", dt.date(2015, 1, 1), 21),  # at the cutoff: excluded
        Participant("h1", "healthy"),
        Participant("h2", "healthy"),
    ]
    t = dt.datetime(2014, 1, 1, tzinfo=UTC)
    posts = [_post(pid, t) for pid in ("d1", "d2", "h1") for _ in range(5)] + [_post("h2", t)] * 4
    admitted, excluded = admit_cohort(ppl, posts)
    assert admitted == ["d1", "h1"]
    assert excluded == {"d2": "cesd", "h2": "min_posts"}


def test_user_day_aggregation_by_utc_date():
    ppl = [Participant("a", "healthy")]
    posts = [
        _post("a", parse_timestamp("2015-01-01T23:30:00-02:00"), likes=10, hue=0.2, faces=2, filt="Lark"),
        _post("a", parse_timestamp("2015-01-02T08:00:00Z"), likes=20, comments=3, hue=0.4),
        _post("a", parse_timestamp("2015-01-01T10:00:00Z"), likes=5),
        Post("a", parse_timestamp("2015-01-03T10:00:00Z"), 1, 1),   # no features
        _post("zz", parse_timestamp("2015-01-03T10:00:00Z")),       # unknown participant
    ]
    res = aggregate_user_days(posts, ppl)
    assert [d.key for d in res.user_days] == ["a@2015-01-01", "a@2015-01-02"]
    d2 = res.user_days[1]
    assert d2.posts_per_day == 2
    assert d2.likes == 15 and d2.comments == 1.5
    assert d2.mean_hue == pytest.approx(0.3)
    assert d2.filtered_count == 1 and d2.face_post_count == 1 and d2.mean_face_count == 1.0
    assert [r for _, r in res.skipped] == ["missing features", "unknown participant"]


def test_pre_diagnosis_split_is_strict():
    ppl = [Participant("d", "depressed", dt.date(2015, 1, 2), 30), Participant("h", "healthy")]
    days = [dt.datetime(2015, 1, k, 12, tzinfo=UTC) for k in (1, 2, 3)]
    posts = [_post("d", t) for t in days] + [_post("h", t) for t in days]
    ud = aggregate_user_days(posts, ppl).user_days
    kept = split_pre_diagnosis(ud, ppl)
    assert [d.key for d in kept] == ["d@2015-01-01", "h@2015-01-01", "h@2015-01-02", "h@2015-01-03"]
    assert len(pre_diagnosis_posts(posts, ppl)) == 4


def test_rating_subset_window():
    diag = dt.date(2015, 6, 1)
    ppl = [Participant("d", "depressed", diag, 30), Participant("h", "healthy", participation_date=dt.date(2015, 1, 10))]
    base = dt.datetime(2015, 6, 1, tzinfo=UTC)
    posts = [_post("d", base - dt.timedelta(days=k), pid_id=f"d{k}") for k in (0, 1, 2, 364, 366)]
    posts += [_post("h", dt.datetime(2015, 1, k, tzinfo=UTC), pid_id=f"h{k}") for k in range(1, 13)]
    keys = select_rating_subset(posts, ppl, size=3)
    assert keys[:3] == ["d364", "d2", "d1"]                # diagnosis day and > 1 year are outside
    assert keys[3:] == ["h7", "h8", "h9"]                  # three most recent before joining
    assert select_rating_subset(posts, ppl, size=100)[:4] == ["d364", "d2", "d1", "h1"]


def test_rating_aggregate():
    rs = [Rating("p", f"r{i}", v, 1, 2, 3) for i, v in enumerate((1.0, 2.0, 4.5))] + [Rating("q", "r1", 5, 5, 5, 5)]
    agg = aggregate_ratings(rs, ["p", "q", "missing"])
    assert agg.means["p"] == pytest.approx((2.5, 1, 2, 3))
    assert agg.counts == {"p": 3, "q": 1}
    assert agg.flagged == ["q"] and agg.excluded == ["missing"]


# ---- feature matrices -------------------------------------------------------------

@given(st.lists(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3), min_size=3, max_size=40))
def test_standardize_moments_and_inverse(rows):
    x = np.array(rows)
    if np.any(x.std(axis=0) <= 1e-6 * np.maximum(1, np.abs(x).max(axis=0))):
        return
    m = FeatureMatrix(tuple(map(str, range(len(x)))), ("a", "b", "c"), x, np.arange(len(x)) % 2)
    z = standardize(m)
    assert np.allclose(z.values.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(z.values.std(axis=0), 1, atol=1e-9)
    assert np.allclose(z.inverse(), x, rtol=1e-9, atol=1e-6)
    assert np.allclose(standardize(z).values, z.values, atol=1e-9)


def test_standardize_names_constant_column():
    m = FeatureMatrix(("a", "b", "c"), ("x", "flat"), [[1, 7], [2, 7], [3, 7]], [0, 1, 0])
    with pytest.raises(ValueError, match="'flat'"):
        standardize(m)


def test_matrix_csv_round_trip(tmp_path):
    m = FeatureMatrix(("a", "b"), ("x", "y"), [[0.1, 1 / 3], [2.0, -5.5]], [1, 0])
    p = tmp_path / "m.csv"
    p.write_text(matrix_to_csv(m))
    back = read_matrix_csv(p)
    assert back.ids == m.ids and back.feature_names == m.feature_names
    assert np.array_equal(back.values, m.values) and np.array_equal(back.target, m.target)
    p.write_text("id,x,target\na,1.0,2\n")
    with pytest.raises(ValueError, match=":2:"):
        read_matrix_csv(p)


def test_summary_stats():
    ppl = [Participant("h1", "healthy"), Participant("h2", "healthy"), Participant("h3", "healthy")]
    t = dt.datetime(2015, 1, 1, tzinfo=UTC)
    posts = [_post("h1", t)] * 5 + [_post("h2", t)] * 6 + [_post("h3", t)] * 10
    s = summary_stats(ppl, posts)
    assert s["healthy"] == {"users": 3, "posts": 21, "mean": 7.0, "sd": pytest.approx(np.std([5, 6, 10], ddof=1)),
                            "median": 6.0}
    assert s["depressed"]["users"] == 0


# ---- synthetic cohorts ----------------------------------------------------------

@given(st.integers(0, 10_000), st.integers(1, 50), st.integers(0, 5), st.floats(0, 2.5))
def test_allocate_exact(total_extra, n, minimum, log_sd):
    rng = np.random.default_rng(total_extra)
    counts = _allocate(minimum * n + total_extra, n, minimum, log_sd, rng)
    assert counts.sum() == minimum * n + total_extra
    assert counts.min() >= minimum


def test_group_parameters_null_and_full():
    p0 = group_parameters(0.0)
    for k in ("hue", "saturation", "brightness", "comments", "likes"):
        assert p0[k]["mean"][0] == pytest.approx(p0[k]["mean"][1])
    assert np.allclose(*p0["filter_probs"])
    p1 = group_parameters(1.0)
    assert p1["p_filter"][1] == pytest.approx(0.442)
    assert p1["hue"]["mean"][1] == pytest.approx(0.345)
    big = group_parameters(20.0)
    assert 0 < big["p_filter"][1] < 1 and big["likes"]["mean"][1] > 0


def test_desk_cohort_is_deterministic_and_valid():
    a = generate_cohort(CohortSpec.desk(), seed=3)
    b = generate_cohort(CohortSpec.desk(), seed=3)
    assert a.jsonl() == b.jsonl()
    assert len(a.participants) == 20 and len(a.posts) == 600
    admitted, excluded = admit_cohort(a.participants, a.posts)
    assert len(admitted) == 20 and not excluded
    assert a.jsonl() != generate_cohort(CohortSpec.desk(), seed=4).jsonl()
    by_id = {p.id: p for p in a.participants}
    for p in a.participants:
        if p.depressed:
            assert p.cesd_score > 21
    for q in a.posts:
        assert q.date < by_id[q.participant_id].participation_date
    ud = aggregate_user_days(a.posts, a.participants).user_days
    m = build_feature_matrix(ud, COMPUTATIONAL_FEATURES)
    assert m.values.shape == (len(ud), len(COMPUTATIONAL_FEATURES))
    assert dataset_counts(ud)["observations"] == len(ud)


def test_subthreshold_participants_excluded():
    c = generate_cohort(CohortSpec.desk(n_subthreshold=3, with_ratings=False), seed=1)
    _, excluded = admit_cohort(c.participants, c.posts)
    assert sorted(excluded) == ["s000", "s001", "s002"]
    assert set(excluded.values()) == {"cesd"}


def test_spec_validation():
    with pytest.raises(ValueError):
        CohortSpec(n_depressed=10, posts_depressed=20).validate()
    with pytest.raises(ValueError, match="unknown"):
        CohortSpec.from_dict({"bogus": 1})
    assert CohortSpec.from_dict({"posts_log_sd": [1.0, 1.0]}).posts_log_sd == (1.0, 1.0)


@pytest.mark.slow
def test_default_cohort_shape():
    c = generate_cohort(CohortSpec(), seed=0)
    s = summary_stats(c.participants, c.posts)
    assert s["depressed"]["users"] == 71 and s["healthy"]["users"] == 95
    assert s["depressed"]["posts"] == 24_811 and s["healthy"]["posts"] == 19_139
    # skewed counts: median well under the mean
    assert s["total"]["median"] < 0.7 * s["total"]["mean"]
