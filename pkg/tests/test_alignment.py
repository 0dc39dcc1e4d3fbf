"""Stage-1 scoring and top-k selection."""

import math

import numpy as np
import pytest

from prunekit import (
    AlignmentScores,
    CrossMetric,
    DimMismatchError,
    DimTooSmallError,
    KeepOutOfRangeError,
    Modality,
    TokenMatrix,
    ZeroNormTokenError,
    score_cosine,
    score_knn_mi,
    score_l2,
    select_top,
)
from prunekit.alignment import knn_mi_pair

from conftest import random_tokens


def tm(rows):
    return TokenMatrix.from_rows(np.asarray(rows, dtype=np.float32))


def naive_l2_scores(visual, textual):
    """Independent double-loop reference for the negated mean distance."""
    v = visual.matrix.astype(np.float64)
    t = textual.matrix.astype(np.float64)
    out = []
    for i in range(visual.rows):
        acc = 0.0
        for j in range(textual.rows):
            acc += math.sqrt(float(((v[i] - t[j]) ** 2).sum()))
        out.append(-acc / textual.rows)
    return np.array(out)


class TestScoreL2:
    def test_zero_distance(self):
        s = score_l2(tm([[0, 0]]), tm([[0, 0]]))
        assert s.values[0] == 0.0

    def test_three_four_five(self):
        s = score_l2(tm([[3, 4]]), tm([[0, 0]]))
        assert s.values[0] == pytest.approx(-5.0)

    def test_symmetric_pair(self):
        s = score_l2(tm([[1, 0]]), tm([[0, 0], [2, 0]]))
        assert s.values[0] == pytest.approx(-1.0)

    def test_all_nonpositive(self, rng):
        s = score_l2(random_tokens(rng, 20, 8), random_tokens(rng, 5, 8))
        assert (s.values <= 0).all()

    def test_matches_double_loop(self, rng):
        for _ in range(10):
            v = random_tokens(rng, int(rng.integers(1, 30)), 16)
            t = random_tokens(rng, int(rng.integers(1, 8)), 16)
            got = score_l2(v, t).values
            want = naive_l2_scores(v, t)
            np.testing.assert_allclose(got, want, rtol=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            score_l2(tm([[1, 2]]), tm([[1, 2, 3]]))


class TestScoreCosine:
    def test_parallel(self):
        assert score_cosine(tm([[1, 0]]), tm([[2, 0]])).values[0] == pytest.approx(1.0)

    def test_orthogonal(self):
        assert score_cosine(tm([[1, 0]]), tm([[0, 3]])).values[0] == pytest.approx(0.0)

    def test_cancelling_pair(self):
        s = score_cosine(tm([[1, 0]]), tm([[1, 0], [-1, 0]]))
        assert s.values[0] == pytest.approx(0.0)

    def test_zero_norm_rejected(self):
        with pytest.raises(ZeroNormTokenError, match="row 1"):
            score_cosine(tm([[1, 0], [0, 0]]), tm([[1, 0]]))
        with pytest.raises(ZeroNormTokenError, match="textual"):
            score_cosine(tm([[1, 0]]), tm([[0, 0]]))

    def test_per_row_rescaling_invariance(self, rng):
        v = random_tokens(rng, 12, 6)
        t = random_tokens(rng, 4, 6)
        # powers of two rescale f32 rows without rounding: scores identical bits
        exact = v.matrix.copy()
        exact[3] *= 16.0
        s0 = score_cosine(v, t).values
        s_exact = score_cosine(TokenMatrix.from_rows(exact), t).values
        np.testing.assert_array_equal(s0, s_exact)
        # arbitrary positive scales round the stored rows; scores stay put
        rough = v.matrix.copy()
        rough[3] *= 17.0
        s_rough = score_cosine(TokenMatrix.from_rows(rough), t).values
        np.testing.assert_allclose(s0, s_rough, atol=1e-7)


class TestScoreKnnMi:
    def test_identical_beats_independent(self, rng):
        x = rng.standard_normal(64).astype(np.float32)
        same = score_knn_mi(tm([x]), tm([x.copy()]), k=3).values[0]
        indep = score_knn_mi(tm([x]), tm([rng.standard_normal(64)]), k=3).values[0]
        assert same > indep

    def test_independent_mean_near_zero(self):
        # Monte-Carlo over seeded trials; independent variables have MI 0.
        vals = []
        for seed in range(100):
            r = np.random.default_rng(seed)
            v = tm([r.standard_normal(256)])
            t = tm([r.standard_normal(256)])
            vals.append(score_knn_mi(v, t, k=3).values[0])
        assert -0.1 <= float(np.mean(vals)) <= 0.1

    def test_dim_too_small(self):
        v = tm([[1, 2, 3]])
        with pytest.raises(DimTooSmallError):
            score_knn_mi(v, tm([[1, 2, 3]]), k=3)

    def test_deterministic(self, rng):
        v = random_tokens(rng, 3, 32)
        t = random_tokens(rng, 2, 32)
        a = score_knn_mi(v, t).values
        b = score_knn_mi(v, t).values
        np.testing.assert_array_equal(a, b)


class TestSelectTop:
    def test_direct_ordering(self):
        s = AlignmentScores(np.array([-1.0, -3.0, -2.0]), CrossMetric.L2)
        assert select_top(s, 2).indices == (0, 2)

    def test_tie_break_lowest_index(self):
        s = AlignmentScores(np.array([-1.0, -1.0, -1.0]), CrossMetric.L2)
        sel = select_top(s, 2)
        assert sel.indices == (0, 1)

    def test_matches_full_sort(self, rng):
        values = rng.standard_normal(100)
        s = AlignmentScores(values, CrossMetric.L2)
        got = set(select_top(s, 40).indices)
        want = set(sorted(range(100), key=lambda i: (-values[i], i))[:40])
        assert got == want

    def test_identity_when_keep_is_n(self, rng):
        s = AlignmentScores(rng.standard_normal(17), CrossMetric.L2)
        assert select_top(s, 17).indices == tuple(range(17))

    def test_monotone_nesting(self, rng):
        s = AlignmentScores(rng.standard_normal(30), CrossMetric.L2)
        prev = set()
        for k in range(1, 31):
            cur = set(select_top(s, k).indices)
            assert prev <= cur
            prev = cur

    def test_keep_out_of_range(self):
        s = AlignmentScores(np.zeros(3), CrossMetric.L2)
        with pytest.raises(KeepOutOfRangeError):
            select_top(s, 0)
        with pytest.raises(KeepOutOfRangeError):
            select_top(s, 4)

    def test_scores_carried(self):
        s = AlignmentScores(np.array([-1.0, -3.0, -2.0]), CrossMetric.L2)
        sel = select_top(s, 2)
        assert sel.scores == (-1.0, -2.0)


class TestInvariances:
    def test_translation_invariance(self, rng):
        for _ in range(10):
            v = random_tokens(rng, 25, 8, Modality.VISUAL)
            t = random_tokens(rng, 6, 8, Modality.TEXTUAL)
            shift = rng.standard_normal(8).astype(np.float32) * 3
            v2 = TokenMatrix.from_rows(v.matrix + shift)
            t2 = TokenMatrix.from_rows(t.matrix + shift)
            s0 = score_l2(v, t)
            s1 = score_l2(v2, t2)
            np.testing.assert_allclose(s0.values, s1.values, atol=1e-5)
            assert select_top(s0, 10).indices == select_top(s1, 10).indices

    def test_scale_equivariance(self, rng):
        for _ in range(10):
            v = random_tokens(rng, 25, 8)
            t = random_tokens(rng, 6, 8)
            c = float(rng.uniform(0.1, 10.0))
            v2 = TokenMatrix.from_rows(v.matrix * np.float32(c))
            t2 = TokenMatrix.from_rows(t.matrix * np.float32(c))
            s0 = score_l2(v, t)
            s1 = score_l2(v2, t2)
            np.testing.assert_allclose(s1.values, c * s0.values, rtol=1e-5)
            assert select_top(s0, 10).indices == select_top(s1, 10).indices
