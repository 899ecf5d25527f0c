from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from models.core.src.types import (
    ComparisonGraph,
    EdgeFlow,
    GradeRecord,
    MethodTag,
    RankingResult,
    ScoreScale,
    VertexIndex,
    WeightMatrix,
)


class TestGradeRecord:
    def test_fields_are_trimmed(self):
        record = GradeRecord(assignment=" hw1 ", grader="s2 ", gradee=" s7", score=85)
        assert (record.assignment, record.grader, record.gradee, record.score) == ("hw1", "s2", "s7", 85.0)

    def test_self_grade_rejected(self):
        with pytest.raises(ValidationError, match="self-grade"):
            GradeRecord(assignment="hw1", grader="s2", gradee="s2", score=85)

    @pytest.mark.parametrize("score", [float("nan"), float("inf")])
    def test_non_finite_score_rejected(self, score):
        with pytest.raises(ValidationError):
            GradeRecord(assignment="hw1", grader="s1", gradee="s2", score=score)

    def test_records_are_immutable(self):
        record = GradeRecord(assignment="hw1", grader="s1", gradee="s2", score=50)
        with pytest.raises(ValidationError):
            record.score = 60  # type: ignore[misc]


class TestScoreScale:
    def test_default_is_hundred_mark(self):
        scale = ScoreScale()
        assert scale.contains(0) and scale.contains(100) and not scale.contains(100.5)
        assert scale.label() == "[0,100]"
        assert scale.normalize(75.0) == 0.75

    def test_inverted_bounds_rejected(self):
        with pytest.raises(ValidationError):
            ScoreScale(low=10, high=10)


class TestVertexIndex:
    def test_first_appearance_order(self):
        rows = [
            GradeRecord(assignment="a", grader="g", gradee="x", score=1),
            GradeRecord(assignment="a", grader="x", gradee="y", score=1),
            GradeRecord(assignment="a", grader="y", gradee="g", score=1),
        ]
        index = VertexIndex.from_records(rows)
        assert index.ids == ("g", "x", "y")
        assert index.index_of("y") == 2
        assert "x" in index and "z" not in index

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            VertexIndex(("a", "a"))


class TestEdgeFlow:
    def test_reverse_reads_negated(self):
        flow = EdgeFlow.from_entries(4, [(2, 0, 3.5), (1, 3, -2.0), (0, 1, 0.25)])
        for i, j, v in [(2, 0, 3.5), (1, 3, -2.0), (0, 1, 0.25)]:
            assert flow.value(i, j) == v
            assert flow.value(j, i) == -v

    def test_diagonal_and_absent_pairs_are_zero(self):
        flow = EdgeFlow.from_entries(3, [(0, 1, 1.0)])
        assert flow.value(1, 1) == 0.0
        assert flow.value(0, 2) == 0.0

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(ValueError):
            EdgeFlow.from_entries(3, [(1, 1, 2.0)])

    def test_duplicate_pair_rejected(self):
        with pytest.raises(ValueError):
            EdgeFlow.from_entries(3, [(0, 1, 1.0), (1, 0, -1.0)])

    def test_dense_round_trip(self):
        matrix = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, -1.0], [1.0, 1.0, 0.0]])
        np.testing.assert_array_equal(EdgeFlow.from_dense(matrix).to_dense(), matrix)

    def test_non_skew_matrix_rejected(self):
        with pytest.raises(ValueError):
            EdgeFlow.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))


class TestWeightMatrix:
    def test_symmetric_lookup(self):
        weights = WeightMatrix.from_arrays(3, [2], [0], [4.0])
        assert weights.weight(0, 2) == weights.weight(2, 0) == 4.0
        assert weights.weight(0, 1) == 0.0

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            WeightMatrix.from_arrays(2, [0], [1], [-1.0])


class TestComparisonGraph:
    def test_zero_weight_pairs_are_not_edges(self):
        flow = EdgeFlow.from_entries(3, [(0, 1, 2.0)])
        weights = WeightMatrix.from_arrays(3, [0, 1], [1, 2], [1.0, 0.0])
        graph = ComparisonGraph.build(("a", "b", "c"), flow, weights)
        assert graph.m == 1
        assert np.all(graph.edge_weights > 0)

    def test_flow_off_the_edge_set_rejected(self):
        flow = EdgeFlow.from_entries(3, [(0, 2, 1.0)])
        weights = WeightMatrix.from_arrays(3, [0], [1], [1.0])
        with pytest.raises(ValueError, match="zero weight"):
            ComparisonGraph.build(("a", "b", "c"), flow, weights)


class TestRankingResult:
    def test_ties_share_the_minimum_rank(self):
        result = RankingResult(
            method_tag=MethodTag.CUMULATIVE_AVG, scores={"c": 70.0, "a": 90.0, "b": 70.0, "d": 50.0}
        )
        rows = result.ranked()
        assert [(r.rank, r.student) for r in rows] == [(1, "a"), (2, "b"), (2, "c"), (4, "d")]

    def test_hodgerank_residual_cannot_exceed_flow(self):
        with pytest.raises(ValidationError):
            RankingResult(
                method_tag=MethodTag.HODGERANK, scores={"a": 0.0}, residual_norm_sq=2.0, flow_norm_sq=1.0
            )
