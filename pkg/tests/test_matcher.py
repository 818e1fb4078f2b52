import numpy as np
import pytest

from sharc.core import cosine_similarity, euclidean_distance
from sharc.exceptions import AlignmentError, InvalidInput
from sharc.gallery import GalleryIndex, IndexEntry
from sharc.matcher import (
    ScoreMatrix,
    appearance_scores,
    fuse_scores,
    rank,
    shape_scores,
)


def _index(entries):
    return GalleryIndex(
        entries=[
            IndexEntry(subject_id=s, shape=np.asarray(sh, float), appearance=np.asarray(ap, float), source_count=1)
            for s, sh, ap in entries
        ]
    )


class TestScoreMatrix:
    def test_shape_validation(self):
        with pytest.raises(InvalidInput):
            ScoreMatrix(np.zeros((2, 3)), ["q0"], ["a", "b", "c"])
        with pytest.raises(InvalidInput):
            ScoreMatrix(np.array([[np.nan]]), ["q0"], ["a"])

    def test_csv_roundtrip_is_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        m = ScoreMatrix(rng.standard_normal((4, 3)) * 1e-7, [f"q{i}" for i in range(4)], ["a", "b", "c"])
        p = tmp_path / "s.csv"
        m.write_csv(p, header_comment="tool test")
        back = ScoreMatrix.read_csv(p)
        assert back.query_ids == m.query_ids
        assert back.gallery_ids == m.gallery_ids
        np.testing.assert_array_equal(back.scores, m.scores)
        assert p.read_text().startswith("# tool test\n")

    def test_read_rejects_missing_header(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("nope,a\nq0,1.0\n")
        with pytest.raises(InvalidInput):
            ScoreMatrix.read_csv(p)


class TestShapeScores:
    def test_matches_cosine_oracle(self):
        rng = np.random.default_rng(0)
        idx = _index([(f"s{i}", rng.standard_normal(6), rng.standard_normal(5)) for i in range(4)])
        queries = [(f"q{i}", rng.standard_normal(6)) for i in range(3)]
        m = shape_scores(queries, idx)
        for qi, (_, q) in enumerate(queries):
            for gi, e in enumerate(idx.entries):
                assert m.scores[qi, gi] == cosine_similarity(q, e.shape)

    def test_multiple_entries_take_max(self):
        idx = _index(
            [
                ("s0", [1.0, 0.0], [0.0]),
                ("s0", [0.0, 1.0], [0.0]),
                ("s1", [-1.0, 0.0], [0.0]),
            ]
        )
        m = shape_scores([("q", np.array([1.0, 0.0]))], idx)
        assert m.gallery_ids == ["s0", "s1"]
        assert m.scores[0, 0] == 1.0  # max over the two s0 entries
        assert m.scores[0, 1] == -1.0


class TestAppearanceScores:
    def test_raw_scores_are_negated_distances(self):
        rng = np.random.default_rng(1)
        idx = _index([(f"s{i}", rng.standard_normal(3), rng.standard_normal(5)) for i in range(4)])
        queries = [(f"q{i}", rng.standard_normal(5)) for i in range(2)]
        m = appearance_scores(queries, idx, rescale=False)
        for qi, (_, q) in enumerate(queries):
            for gi, e in enumerate(idx.entries):
                assert m.scores[qi, gi] == -euclidean_distance(q, e.appearance)

    def test_rescaled_rows_span_unit_interval(self):
        rng = np.random.default_rng(2)
        idx = _index([(f"s{i}", rng.standard_normal(3), rng.standard_normal(5)) for i in range(5)])
        queries = [(f"q{i}", rng.standard_normal(5)) for i in range(3)]
        m = appearance_scores(queries, idx)
        assert np.all(m.scores >= 0.0) and np.all(m.scores <= 1.0)
        np.testing.assert_array_equal(m.scores.min(axis=1), 0.0)
        np.testing.assert_array_equal(m.scores.max(axis=1), 1.0)

    def test_rescale_preserves_order(self):
        rng = np.random.default_rng(4)
        idx = _index([(f"s{i}", rng.standard_normal(3), rng.standard_normal(5)) for i in range(5)])
        queries = [("q0", rng.standard_normal(5))]
        raw = appearance_scores(queries, idx, rescale=False)
        scaled = appearance_scores(queries, idx)
        np.testing.assert_array_equal(np.argsort(raw.scores[0]), np.argsort(scaled.scores[0]))

    def test_degenerate_row_maps_to_half(self):
        idx = _index([("s0", [0.0], [1.0, 0.0]), ("s1", [0.0], [-1.0, 0.0])])
        m = appearance_scores([("q", np.array([0.0, 0.0]))], idx)
        np.testing.assert_array_equal(m.scores, [[0.5, 0.5]])


class TestFusion:
    def _pair(self):
        rng = np.random.default_rng(5)
        q, g = [f"q{i}" for i in range(4)], [f"s{i}" for i in range(6)]
        a = ScoreMatrix(rng.standard_normal((4, 6)), q, g)
        b = ScoreMatrix(rng.standard_normal((4, 6)), q, g)
        return a, b

    def test_affine_combination(self):
        a, b = self._pair()
        for alpha in (0.1, 0.37, 0.9):
            fused = fuse_scores(a, b, alpha)
            np.testing.assert_array_equal(fused.scores, alpha * a.scores + (1 - alpha) * b.scores)

    def test_endpoint_degeneracy_is_exact(self):
        a, b = self._pair()
        np.testing.assert_array_equal(fuse_scores(a, b, 1.0).scores, a.scores)
        np.testing.assert_array_equal(fuse_scores(a, b, 0.0).scores, b.scores)

    def test_alpha_bounds(self):
        a, b = self._pair()
        with pytest.raises(InvalidInput):
            fuse_scores(a, b, -0.1)
        with pytest.raises(InvalidInput):
            fuse_scores(a, b, 1.5)

    def test_misaligned_axes_rejected(self):
        a, b = self._pair()
        swapped = ScoreMatrix(b.scores, b.query_ids, list(reversed(b.gallery_ids)))
        with pytest.raises(AlignmentError):
            fuse_scores(a, swapped, 0.5)


class TestRank:
    def test_descending_order(self):
        m = ScoreMatrix(np.array([[0.2, 0.9, 0.5]]), ["q"], ["a", "b", "c"])
        assert rank(m) == [["b", "c", "a"]]

    def test_ties_break_by_ascending_id(self):
        m = ScoreMatrix(np.array([[0.5, 0.5, 0.1]]), ["q"], ["zz", "aa", "mm"])
        assert rank(m) == [["aa", "zz", "mm"]]

    def test_each_row_is_a_permutation(self):
        rng = np.random.default_rng(6)
        ids = [f"s{i}" for i in range(7)]
        m = ScoreMatrix(rng.standard_normal((5, 7)), [f"q{i}" for i in range(5)], ids)
        for row in rank(m):
            assert sorted(row) == sorted(ids)
