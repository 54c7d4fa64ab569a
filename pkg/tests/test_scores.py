import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randrank.errors import DegenerateScoresError, DomainError, ValidationError
from randrank.scores import (
    RankVector,
    RawScores,
    ScoreFamily,
    condition_diagnostics,
    median_scores,
    normal_quantile,
    normalize,
    savage_scores,
    spike_scores,
    van_der_waerden_scores,
    wilcoxon_scores,
)

mpmath.mp.dps = 40


def mp_quantile(p: float) -> float:
    return float(-mpmath.sqrt(2) * mpmath.erfinv(1 - 2 * mpmath.mpf(p)))


def rv(*ranks):
    return RankVector(ranks)


def test_rank_vector_validation():
    with pytest.raises(ValidationError):
        rv(1, 1, 2)
    with pytest.raises(ValidationError):
        rv(0, 1)
    with pytest.raises(ValidationError):
        RankVector.from_outcomes([0.5, 0.5])
    assert RankVector.from_outcomes([2.5, -1.0, 7.0]).ranks == (2, 1, 3)


def test_median_scores():
    assert list(median_scores(rv(1, 2, 3, 4)).a) == [0, 0, 1, 1]
    assert list(median_scores(rv(4, 3, 2, 1)).a) == [1, 1, 0, 0]
    assert list(median_scores(rv(1, 2)).a) == [0, 1]
    for n in (2, 8, 30):
        assert median_scores(RankVector.identity(n)).a.sum() == n // 2


def test_wilcoxon_scores():
    assert list(wilcoxon_scores(rv(1, 2, 3, 4)).a) == [1, 2, 3, 4]
    assert list(wilcoxon_scores(rv(2, 1)).a) == [2, 1]
    assert list(wilcoxon_scores(rv(3, 1, 2)).a) == [3, 1, 2]


def test_van_der_waerden_scores():
    a = van_der_waerden_scores(rv(1, 2, 3)).a
    np.testing.assert_allclose(a, [-0.6744897501960817, 0.0, 0.6744897501960817], atol=1e-6)
    a = van_der_waerden_scores(rv(1, 2)).a
    np.testing.assert_allclose(a, [mp_quantile(1 / 3), mp_quantile(2 / 3)], atol=1e-12)
    np.testing.assert_allclose(a, [-0.43073, 0.43073], atol=1e-5)
    for n in (5, 40, 301):
        a = van_der_waerden_scores(RankVector.identity(n)).a
        assert np.max(np.abs(a + a[::-1])) <= 1e-12


def test_savage_scores():
    np.testing.assert_allclose(savage_scores(rv(1, 2)).a, [-0.5, 0.5], atol=1e-15)
    expected = np.cumsum([1 / 4, 1 / 3, 1 / 2, 1]) - 1
    np.testing.assert_allclose(savage_scores(rv(1, 2, 3, 4)).a, expected, atol=1e-12)
    np.testing.assert_allclose(expected, [-0.75, -0.4166667, 0.0833333, 1.0833333], atol=1e-6)
    for n in (2, 17, 1000):
        assert abs(savage_scores(RankVector.identity(n)).a.sum()) <= 1e-10


def test_normal_quantile_examples():
    assert normal_quantile(0.5) == 0.0
    assert abs(normal_quantile(0.975) - 1.959964) <= 1e-5
    # complements must be exact in binary64 for the identity to be testable
    for p in (2.0**-33, 2.0**-10, 0.01, 0.2, 0.3, 0.45):
        assert abs(normal_quantile(p) + normal_quantile(1 - p)) <= 1e-12
    for bad in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(DomainError):
            normal_quantile(bad)


def test_normal_quantile_against_high_precision():
    lo = np.logspace(-12, math.log10(0.49), 300)
    ps = np.concatenate([lo, 1 - lo, np.linspace(0.02, 0.98, 97)])
    err = max(abs(normal_quantile(float(p)) - mp_quantile(float(p))) for p in ps)
    assert err <= 1e-9


def test_normal_quantile_vectorized_matches_scalar():
    ps = np.linspace(0.001, 0.999, 101)
    vec = normal_quantile(ps)
    assert all(vec[i] == normal_quantile(float(p)) for i, p in enumerate(ps))


def test_normalize_wilcoxon_example():
    s = normalize(RawScores([1, 2, 3, 4])).s
    np.testing.assert_allclose(s, np.array([-1.5, -0.5, 0.5, 1.5]) / math.sqrt(5), atol=1e-15)
    np.testing.assert_allclose(s, [-0.67082, -0.22361, 0.22361, 0.67082], atol=1e-5)
    with pytest.raises(DegenerateScoresError):
        normalize(RawScores([1, 1, 1, 1]))


finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=2, max_size=60), st.floats(0.01, 100), finite)
def test_normalize_identities(a, slope, shift):
    a = np.array(a)
    if np.ptp(a) < 1e-6:
        return
    for raw in (a, slope * a + shift):
        s = normalize(RawScores(raw)).s
        assert abs(s.sum()) <= 1e-12
        assert abs(np.dot(s, s) - 1) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(list(ScoreFamily)),
    st.integers(2, 300),
    st.floats(0.1, 10),
    st.floats(-10, 10),
)
def test_normalize_affine_invariance(family, n, slope, shift):
    from randrank.scores import family_scores

    a = family_scores(family, RankVector.identity(n)).a
    s = normalize(RawScores(a)).s
    np.testing.assert_allclose(normalize(RawScores(slope * a + shift)).s, s, rtol=0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 200), st.randoms(use_true_random=False))
def test_rank_reversal_antisymmetry(n, rnd):
    perm = list(range(1, n + 1))
    rnd.shuffle(perm)
    r = RankVector(tuple(perm))
    rev = RankVector(tuple(n + 1 - x for x in perm))
    for fn in (wilcoxon_scores, van_der_waerden_scores):
        s, t = normalize(fn(r)).s, normalize(fn(rev)).s
        assert np.max(np.abs(s + t)) <= 1e-12


def test_condition_diagnostics_examples():
    rep = condition_diagnostics(ScoreFamily.WILCOXON, [100])
    assert rep.rows[0].max_s_sq == pytest.approx(3 * 99 / (100 * 101), abs=1e-14)
    assert rep.rows[0].max_s_sq == pytest.approx(0.029405, abs=1e-6)
    rep = condition_diagnostics("median", [100])
    assert rep.rows[0].max_s_sq == pytest.approx(0.01, abs=1e-15)
    ns = [2**k for k in range(6, 15)]
    for fam in ScoreFamily:
        rep = condition_diagnostics(fam, ns)
        for row in rep.rows:
            assert row.tail_max_s_sq == row.max_s_sq
            assert row.scaled_s1 == pytest.approx(row.max_s_sq * math.sqrt(row.n))
            assert row.scaled_s2 == pytest.approx(row.max_s_sq * math.sqrt(row.n * math.log(row.n)))


def test_condition_diagnostics_verdicts():
    ns = [2**k for k in range(6, 15)]
    for fam in (ScoreFamily.MEDIAN, ScoreFamily.WILCOXON, ScoreFamily.VAN_DER_WAERDEN):
        assert condition_diagnostics(fam, ns).verdict == "pass"
    # Savage: max s^2 ~ ln^2 n / n, so scaled_s2 ~ ln^2.5 n / sqrt(n) peaks at ln n = 5 (n ~ 148)
    savage = condition_diagnostics(ScoreFamily.SAVAGE, ns)
    s1 = [r.scaled_s1 for r in savage.rows]
    s2 = [r.scaled_s2 for r in savage.rows]
    assert all(b < a for a, b in zip(s1, s1[1:]))
    assert s2[1] > s2[0] and all(b < a for a, b in zip(s2[1:], s2[2:]))
    assert condition_diagnostics(ScoreFamily.SAVAGE, ns[2:]).verdict == "pass"


def test_condition_diagnostics_order_band():
    ns = [2**k for k in range(6, 15)]
    for fam in ScoreFamily:
        assert condition_diagnostics(fam, ns).band_ratio() <= 4


def test_condition_diagnostics_spike_fails():
    rep = condition_diagnostics(spike_scores, [2**k for k in range(6, 15)])
    assert rep.verdict == "fail"
    assert math.isnan(rep.band_ratio())


def test_condition_diagnostics_validation():
    with pytest.raises(ValidationError):
        condition_diagnostics("wilcoxon", [])
    with pytest.raises(ValidationError):
        condition_diagnostics("wilcoxon", [2])
    with pytest.raises(ValidationError):
        condition_diagnostics("wilcoxon", [101])
