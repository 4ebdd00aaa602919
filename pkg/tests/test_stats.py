import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from photomarkers.cohort import FeatureMatrix, Rating
from photomarkers.stats import (
    ContingencyTable, chi2_independence, chi2_upper_tail, correlation_matrix, interrater_agreement, pearson_r,
)


def mp_upper_tail(x, df):
    return float(mpmath.gammainc(mpmath.mpf(df) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))


@given(st.floats(0, 400), st.integers(1, 60))
def test_chi2_tail_matches_mpmath(x, df):
    want = mp_upper_tail(x, df)
    got = chi2_upper_tail(x, df)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-300)


def test_chi2_tail_reference_points():
    assert chi2_upper_tail(3.841, 1) == pytest.approx(0.050, abs=1e-3)
    assert chi2_upper_tail(0.0, 4) == 1.0
    assert chi2_upper_tail(907.84, 44) == pytest.approx(mp_upper_tail(907.84, 44), rel=1e-9)
    with pytest.raises(ValueError):
        chi2_upper_tail(1.0, 0)


@given(st.lists(st.integers(1, 50), min_size=2, max_size=8), st.integers(1, 6))
def test_proportional_table_is_independent(col, k):
    counts = np.outer(col, [k, 2 * k])
    res = chi2_independence(ContingencyTable(tuple(range(len(col))), ("depressed", "healthy"), counts))
    assert res.statistic == pytest.approx(0, abs=1e-9)
    assert res.p_value == pytest.approx(1.0)
    assert res.df == len(col) - 1


@given(st.lists(st.lists(st.integers(1, 200), min_size=2, max_size=4), min_size=2, max_size=6))
def test_chi2_matches_scipy(rows):
    width = min(len(r) for r in rows)
    counts = np.array([r[:width] for r in rows])
    res = chi2_independence(ContingencyTable(tuple(range(len(rows))), tuple(range(width)), counts))
    stat, p, dof, expected = sps.chi2_contingency(counts, correction=False)
    assert res.statistic == pytest.approx(stat, rel=1e-9, abs=1e-9)
    assert res.p_value == pytest.approx(p, rel=1e-7, abs=1e-300)
    assert res.df == dof
    assert np.allclose(res.expected, expected)
    assert np.allclose(res.difference.sum(axis=0), 0) and np.allclose(res.difference.sum(axis=1), 0)


def test_zero_marginal_named():
    t = ContingencyTable(("Lark", "Juno"), ("depressed", "healthy"), [[3, 4], [0, 0]])
    with pytest.raises(ValueError, match="'Juno'"):
        chi2_independence(t)


def test_from_pairs_and_bars():
    t = ContingencyTable.from_pairs([("b", "depressed"), ("a", "healthy"), ("a", "depressed"), ("a", "healthy")])
    assert t.row_labels == ("a", "b")
    assert t.counts.tolist() == [[1, 2], [1, 0]]
    bars = chi2_independence(t).bars()
    assert bars[0][:3] == ("a", "depressed", 1.0)
    assert bars[0][3] == pytest.approx(2 * 3 / 4)


@given(st.integers(3, 200), st.integers(0, 2**31))
def test_pearson_matches_scipy(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = 0.3 * x + rng.standard_normal(n)
    r, p = pearson_r(x, y)
    ref = sps.pearsonr(x, y)
    assert r == pytest.approx(ref[0], abs=1e-12)
    assert p == pytest.approx(ref[1], rel=1e-6, abs=1e-12)


def test_pearson_edge_cases():
    assert pearson_r([1, 2, 3], [2, 4, 6]) == (1.0, 0.0)
    assert pearson_r([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])[0] == pytest.approx(0.8)
    with pytest.raises(ValueError, match="zero-variance"):
        pearson_r([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson_r([1, 2], [1, 2])


def test_correlation_matrix_lower_triangle(rng):
    x = rng.standard_normal((50, 3))
    m = FeatureMatrix(tuple(map(str, range(50))), ("a", "b", "c"), x, np.zeros(50, dtype=int))
    t = correlation_matrix(m, ("c", "a"))
    assert np.isnan(t.r[0, 1])
    assert t.r[1, 0] == pytest.approx(np.corrcoef(x[:, 2], x[:, 0])[0, 1])
    assert t.rows()[0] == ("c", [1.0])
    with pytest.raises(KeyError):
        correlation_matrix(m, ("nope",))


def _raters(rng, n_photos, rho, per_photo=3):
    # shared latent plus independent noise gives corr(rater i, rater j) = rho
    out = []
    for k in range(n_photos):
        z = rng.standard_normal(4)
        for j in range(per_photo):
            v = 2.5 + 0.5 * (np.sqrt(rho) * z + np.sqrt(1 - rho) * rng.standard_normal(4))
            out.append(Rating(f"p{k}", f"r{j}", *np.clip(v, 0, 5)))
    return out


def test_agreement_recovers_planted_correlation(rng):
    rep = interrater_agreement(_raters(rng, 2000, 0.4), seed=1)
    for c in rep.categories:
        assert 0.33 < rep.r[c] < 0.47
        assert len(rep.fold_r[c]) == 5
    assert rep.n_photos == 2000 and rep.excluded == 0


def test_agreement_deterministic_and_excludes_single():
    rng = np.random.default_rng(0)
    ratings = _raters(rng, 50, 0.5) + [Rating("lonely", "r9", 1, 1, 1, 1)]
    a = interrater_agreement(ratings, seed=3)
    b = interrater_agreement(ratings, seed=3)
    assert a.to_dict() == b.to_dict()
    assert a.excluded == 1
    with pytest.raises(ValueError):
        interrater_agreement([Rating("x", "r", 1, 1, 1, 1)])
