from __future__ import annotations

from collections import Counter, defaultdict

import numpy as np
import pytest
from pydantic import ValidationError

from models.baselines.src.averages import cumulative_average
from models.core.src.types import MethodTag, RankingResult
from models.hodgerank.src.graph import build_graph, component_trajectory
from models.hodgerank.src.solver import solve_hodgerank
from models.synthetic.src.generator import (
    RNG_VERSION,
    CohortConfig,
    SyntheticCohort,
    build_cohort,
    generate,
    kendall_tau,
    parse_distribution,
    read_truth,
    student_ids,
    write_truth,
)


def no_clamp_cohort(seed: int, n: int = 40) -> SyntheticCohort:
    """Integer quality in [30,70] and integer bias within +/-20: no score leaves [0,100]."""
    rng = np.random.default_rng(seed)
    ids = student_ids(n)
    return SyntheticCohort(
        n_students=n,
        n_assignments=6,
        reviews_per_student=4,
        true_quality=dict(zip(ids, rng.integers(30, 71, n).astype(float).tolist(), strict=True)),
        grader_bias=dict(zip(ids, rng.integers(-20, 21, n).astype(float).tolist(), strict=True)),
        grader_noise_sd=dict.fromkeys(ids, 0.0),
        seed=seed,
    )


class TestCohortConfig:
    def test_defaults_match_course_shape(self):
        config = CohortConfig()
        assert (config.n_students, config.n_assignments, config.reviews_per_student) == (133, 13, 5)
        assert config.seed == 42

    @pytest.mark.parametrize(
        "overrides",
        [
            {"n_students": 1},
            {"n_students": 5, "reviews_per_student": 5},
            {"quality": "gamma:1,2"},
            {"quality": "uniform:80,40"},
            {"bias": "normal:-3"},
            {"bias": "constant"},
            {"noise_sd": -1.0},
            {"noise_sd_range": (3.0, 1.0)},
            {"seed": -1},
            {"unknown": 1},
        ],
    )
    def test_invalid_configs_rejected(self, overrides):
        with pytest.raises(ValidationError):
            CohortConfig(**overrides)

    def test_parse_distribution(self):
        assert parse_distribution("uniform:40,80", {"uniform": 2}) == ("uniform", (40.0, 80.0))
        assert parse_distribution(" NONE ", {"none": 0}) == ("none", ())


class TestGenerate:
    def test_default_record_count(self):
        rows = generate(build_cohort(CohortConfig()))
        assert len(rows) == 133 * 5 * 13 == 8645

    def test_deterministic(self):
        config = CohortConfig(n_students=20, n_assignments=3, reviews_per_student=3, seed=7)
        assert generate(build_cohort(config)) == generate(build_cohort(config))

    def test_different_seeds_differ(self):
        a = generate(build_cohort(CohortConfig(n_students=20, n_assignments=2, seed=1)))
        b = generate(build_cohort(CohortConfig(n_students=20, n_assignments=2, seed=2)))
        assert a != b

    def test_peers_are_distinct_and_never_self(self):
        cohort = build_cohort(CohortConfig(n_students=12, n_assignments=4, reviews_per_student=5, seed=3))
        given: dict[tuple[str, str], list[str]] = defaultdict(list)
        for record in generate(cohort):
            assert record.grader != record.gradee
            given[(record.assignment, record.grader)].append(record.gradee)
        assert len(given) == 12 * 4
        for peers in given.values():
            assert len(peers) == 5
            assert len(set(peers)) == 5

    def test_zero_bias_and_noise_reproduce_quality(self):
        config = CohortConfig(n_students=15, n_assignments=2, reviews_per_student=3, bias="none", noise_sd=0.0)
        cohort = build_cohort(config)
        for record in generate(cohort):
            assert record.score == cohort.true_quality[record.gradee]

    def test_constant_bias_preserves_within_grader_differences(self):
        base = no_clamp_cohort(5)
        shifted = base.with_bias(dict.fromkeys(base.students, 20.0))
        rows_a, rows_b = generate(base.without_bias()), generate(shifted)
        assert [(r.assignment, r.grader, r.gradee) for r in rows_a] == [
            (r.assignment, r.grader, r.gradee) for r in rows_b
        ]
        for a, b in zip(rows_a, rows_b, strict=True):
            assert b.score - a.score == 20.0

    def test_beta_quality_spans_the_scale(self):
        cohort = build_cohort(CohortConfig(n_students=50, quality="beta:2,2", seed=9))
        values = list(cohort.true_quality.values())
        assert all(0.0 <= v <= 100.0 for v in values)
        assert max(values) - min(values) > 30

    def test_noise_range_is_per_grader(self):
        cohort = build_cohort(CohortConfig(n_students=30, noise_sd_range=(1.0, 4.0), seed=11))
        sds = list(cohort.grader_noise_sd.values())
        assert all(1.0 <= sd <= 4.0 for sd in sds)
        assert len(set(sds)) > 1

    def test_scores_are_clamped(self):
        config = CohortConfig(n_students=10, n_assignments=1, reviews_per_student=2, bias="constant:90")
        assert all(r.score <= 100.0 for r in generate(build_cohort(config)))

    def test_every_student_reviews_exactly_r_per_assignment(self):
        rows = generate(build_cohort(CohortConfig(n_students=9, n_assignments=2, reviews_per_student=2)))
        assert set(Counter(r.grader for r in rows).values()) == {4}


class TestCohort:
    def test_without_bias(self):
        cohort = build_cohort(CohortConfig(n_students=10, seed=4))
        twin = cohort.without_bias()
        assert set(twin.grader_bias.values()) == {0.0}
        assert twin.true_quality == cohort.true_quality
        assert twin.seed == cohort.seed

    def test_rng_version_recorded(self):
        assert build_cohort(CohortConfig(n_students=4, reviews_per_student=1)).rng_version == RNG_VERSION

    def test_quality_must_lie_on_scale(self):
        ids = student_ids(3)
        with pytest.raises(ValidationError):
            SyntheticCohort(
                n_students=3,
                n_assignments=1,
                reviews_per_student=1,
                true_quality=dict(zip(ids, [10.0, 20.0, 120.0], strict=True)),
                grader_bias=dict.fromkeys(ids, 0.0),
                grader_noise_sd=dict.fromkeys(ids, 0.0),
                seed=0,
            )

    def test_truth_round_trip(self, tmp_path):
        cohort = build_cohort(CohortConfig(n_students=25, seed=13))
        path = write_truth(cohort, tmp_path / "truth.csv")
        assert read_truth(path) == cohort.true_quality

    def test_truth_file_needs_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("student,score\ns001,1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="true_quality"):
            read_truth(path)


class TestKendallTau:
    def test_identical(self):
        assert kendall_tau({"a": 1, "b": 2, "c": 3}, {"a": 10, "b": 20, "c": 30}) == pytest.approx(1.0)

    def test_reversed(self):
        assert kendall_tau({"a": 1, "b": 2, "c": 3}, {"a": 3, "b": 2, "c": 1}) == pytest.approx(-1.0)

    def test_one_swap_of_four(self):
        a = {"w": 1, "x": 2, "y": 3, "z": 4}
        b = {"w": 1, "x": 3, "y": 2, "z": 4}
        assert kendall_tau(a, b) == pytest.approx(2 / 3)

    def test_accepts_ranking_result(self):
        ranking = RankingResult(method_tag=MethodTag.CUMULATIVE_AVG, scores={"a": 1.0, "b": 2.0})
        assert kendall_tau(ranking, {"a": 0.0, "b": 5.0}) == pytest.approx(1.0)

    def test_needs_two_students(self):
        with pytest.raises(ValueError):
            kendall_tau({"a": 1}, {"a": 1, "b": 2})


class TestBiasInvariance:
    def test_hodgerank_ignores_grader_offsets(self):
        cohort = no_clamp_cohort(21)
        biased = solve_hodgerank(build_graph(generate(cohort)))
        clean = solve_hodgerank(build_graph(generate(cohort.without_bias())))
        for sid, value in clean.scores.items():
            assert abs(biased.scores[sid] - value) <= 1e-12

    def test_cumulative_average_shifts_by_mean_grader_bias(self):
        cohort = no_clamp_cohort(22)
        rows = generate(cohort)
        biased = cumulative_average(rows)
        clean = cumulative_average(generate(cohort.without_bias()))
        graders_of: dict[str, list[float]] = defaultdict(list)
        for record in rows:
            graders_of[record.gradee].append(cohort.grader_bias[record.grader])
        for sid, value in clean.scores.items():
            expected = float(np.mean(graders_of[sid]))
            assert biased.scores[sid] - value == pytest.approx(expected, abs=1e-12)

    @pytest.mark.slow
    def test_hodgerank_recovers_truth_at_least_as_well_as_average(self):
        for seed in range(20):
            config = CohortConfig(seed=seed, quality="uniform:30,70", bias="normal:20", noise_sd=5.0)
            cohort = build_cohort(config)
            rows = generate(cohort)
            hodge = kendall_tau(solve_hodgerank(build_graph(rows)), cohort.true_quality)
            average = kendall_tau(cumulative_average(rows), cohort.true_quality)
            assert hodge >= average, f"seed {seed}: hodgerank {hodge:.3f} < average {average:.3f}"


@pytest.mark.slow
def test_components_merge_over_the_course():
    reached_one = 0
    for seed in range(20):
        cohort = build_cohort(CohortConfig(seed=seed))
        counts = component_trajectory(generate(cohort), cohort.assignments)
        assert all(a >= b for a, b in zip(counts, counts[1:], strict=False))
        reached_one += counts[-1] == 1
    assert reached_one >= 19
