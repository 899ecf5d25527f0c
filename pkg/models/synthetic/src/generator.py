"""
Synthetic cohort generator — reproducible grading events with known ground truth.

Two independent Philox streams come from one seed:
  - parameter stream  Philox(seed):          quality, then bias, then noise levels
  - event stream      Philox(seed).jumped(): per assignment, per grader in student
                      order, first the peer choice then one standard normal per review

Noise is always drawn (and scaled by the grader's sd), so a cohort and its
zero-bias twin see exactly the same peers and the same noise.
"""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.stats import kendalltau

from models.core.src.types import GradeRecord, RankingResult, ScoreScale

logger = structlog.get_logger()

RNG_VERSION = "numpy-philox4x64-v1"

QUALITY_KINDS = {"uniform": 2, "normal": 2, "beta": 2}
BIAS_KINDS = {"none": 0, "constant": 1, "uniform": 1, "normal": 1}


def parse_distribution(spec: str, kinds: Mapping[str, int]) -> tuple[str, tuple[float, ...]]:
    """'uniform:40,80' -> ('uniform', (40.0, 80.0)); parameter count checked against `kinds`."""
    kind, _, raw = spec.strip().partition(":")
    kind = kind.strip().lower()
    if kind not in kinds:
        raise ValueError(f"unknown distribution {kind!r}; expected one of {', '.join(kinds)}")
    params = tuple(float(p) for p in raw.split(",") if p.strip()) if raw else ()
    if len(params) != kinds[kind]:
        raise ValueError(f"{kind!r} takes {kinds[kind]} parameter(s), got {len(params)}")
    if not all(np.isfinite(params)):
        raise ValueError(f"non-finite parameter in {spec!r}")
    return kind, params


class CohortConfig(BaseModel):
    """Parameters of a synthetic cohort, loadable from JSON, TOML or YAML."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_students: int = Field(133, ge=2)
    n_assignments: int = Field(13, ge=1)
    reviews_per_student: int = Field(5, ge=1)
    seed: int = Field(42, ge=0, lt=2**64)
    quality: str = Field("uniform:40,80", description="uniform:lo,hi | normal:mean,sd | beta:a,b")
    bias: str = Field("normal:10", description="none | constant:v | uniform:half_width | normal:sd")
    noise_sd: float = Field(5.0, ge=0.0, description="Noise sd shared by every grader")
    noise_sd_range: tuple[float, float] | None = Field(
        None, description="Per-grader noise sd drawn uniformly from [lo, hi]; overrides noise_sd"
    )
    scale: ScoreScale = Field(default_factory=ScoreScale)

    @field_validator("quality")
    @classmethod
    def _check_quality(cls, value: str) -> str:
        kind, params = parse_distribution(value, QUALITY_KINDS)
        if kind == "uniform" and params[0] > params[1]:
            raise ValueError("uniform quality needs lo <= hi")
        if kind == "normal" and params[1] < 0:
            raise ValueError("normal quality needs sd >= 0")
        if kind == "beta" and min(params) <= 0:
            raise ValueError("beta quality needs a, b > 0")
        return value

    @field_validator("bias")
    @classmethod
    def _check_bias(cls, value: str) -> str:
        kind, params = parse_distribution(value, BIAS_KINDS)
        if kind in ("uniform", "normal") and params[0] < 0:
            raise ValueError(f"{kind} bias width must be >= 0")
        return value

    @field_validator("noise_sd_range")
    @classmethod
    def _check_noise_range(cls, value: tuple[float, float] | None) -> tuple[float, float] | None:
        if value is not None and not 0.0 <= value[0] <= value[1]:
            raise ValueError("noise_sd_range needs 0 <= lo <= hi")
        return value

    @model_validator(mode="after")
    def _check_shape(self) -> CohortConfig:
        if self.reviews_per_student >= self.n_students:
            raise ValueError("reviews_per_student must be smaller than n_students")
        return self


class SyntheticCohort(BaseModel):
    """A drawn cohort: ground truth plus every grader's behaviour."""

    model_config = ConfigDict(frozen=True)

    n_students: int = Field(ge=2)
    n_assignments: int = Field(ge=1)
    reviews_per_student: int = Field(ge=1)
    true_quality: dict[str, float]
    grader_bias: dict[str, float]
    grader_noise_sd: dict[str, float]
    seed: int = Field(ge=0, lt=2**64)
    scale: ScoreScale = Field(default_factory=ScoreScale)
    rng_version: str = RNG_VERSION

    @model_validator(mode="after")
    def _check_cohort(self) -> SyntheticCohort:
        if self.reviews_per_student >= self.n_students:
            raise ValueError("reviews_per_student must be smaller than n_students")
        students = set(self.students)
        for name, table in (
            ("true_quality", self.true_quality),
            ("grader_bias", self.grader_bias),
            ("grader_noise_sd", self.grader_noise_sd),
        ):
            if set(table) != students:
                raise ValueError(f"{name} must cover exactly the cohort's students")
        if any(sd < 0 for sd in self.grader_noise_sd.values()):
            raise ValueError("noise sd must be >= 0")
        if not all(self.scale.contains(q) for q in self.true_quality.values()):
            raise ValueError(f"true quality must lie in {self.scale.label()}")
        return self

    @property
    def students(self) -> list[str]:
        return student_ids(self.n_students)

    @property
    def assignments(self) -> list[str]:
        return assignment_ids(self.n_assignments)

    def without_bias(self) -> SyntheticCohort:
        return self.model_copy(update={"grader_bias": dict.fromkeys(self.grader_bias, 0.0)})

    def with_bias(self, bias: Mapping[str, float]) -> SyntheticCohort:
        return self.model_copy(update={"grader_bias": {sid: float(bias[sid]) for sid in self.students}})


def student_ids(n: int) -> list[str]:
    width = max(3, len(str(n)))
    return [f"s{k:0{width}d}" for k in range(1, n + 1)]


def assignment_ids(n: int) -> list[str]:
    width = max(2, len(str(n)))
    return [f"a{k:0{width}d}" for k in range(1, n + 1)]


# ── Drawing ─────────────────────────────────────────────────────────────────


def _draw_quality(spec: str, rng: np.random.Generator, n: int, scale: ScoreScale) -> np.ndarray:
    kind, params = parse_distribution(spec, QUALITY_KINDS)
    if kind == "uniform":
        values = rng.uniform(params[0], params[1], n)
    elif kind == "normal":
        values = rng.normal(params[0], params[1], n)
    else:
        values = scale.low + (scale.high - scale.low) * rng.beta(params[0], params[1], n)
    return scale.clamp(values)


def _draw_bias(spec: str, rng: np.random.Generator, n: int) -> np.ndarray:
    kind, params = parse_distribution(spec, BIAS_KINDS)
    if kind == "none":
        return np.zeros(n)
    if kind == "constant":
        return np.full(n, params[0])
    if kind == "uniform":
        return rng.uniform(-params[0], params[0], n)
    return rng.normal(0.0, params[0], n)


def build_cohort(config: CohortConfig) -> SyntheticCohort:
    rng = np.random.Generator(np.random.Philox(config.seed))
    n = config.n_students
    quality = _draw_quality(config.quality, rng, n, config.scale)
    bias = _draw_bias(config.bias, rng, n)
    if config.noise_sd_range is not None:
        noise = rng.uniform(config.noise_sd_range[0], config.noise_sd_range[1], n)
    else:
        noise = np.full(n, config.noise_sd)

    students = student_ids(n)
    cohort = SyntheticCohort(
        n_students=n,
        n_assignments=config.n_assignments,
        reviews_per_student=config.reviews_per_student,
        true_quality=dict(zip(students, quality.tolist(), strict=True)),
        grader_bias=dict(zip(students, bias.tolist(), strict=True)),
        grader_noise_sd=dict(zip(students, noise.tolist(), strict=True)),
        seed=config.seed,
        scale=config.scale,
    )
    logger.info(
        "cohort_built",
        students=n,
        assignments=config.n_assignments,
        reviews=config.reviews_per_student,
        seed=config.seed,
        quality=config.quality,
        bias=config.bias,
        rng=RNG_VERSION,
    )
    return cohort


def generate(cohort: SyntheticCohort) -> list[GradeRecord]:
    """Grading events in assignment-major, grader-minor order; a pure function of the cohort."""
    rng = np.random.Generator(np.random.Philox(cohort.seed).jumped())
    students = cohort.students
    n, r = cohort.n_students, cohort.reviews_per_student
    quality = np.array([cohort.true_quality[s] for s in students])
    bias = np.array([cohort.grader_bias[s] for s in students])
    noise_sd = np.array([cohort.grader_noise_sd[s] for s in students])

    records: list[GradeRecord] = []
    for assignment in cohort.assignments:
        for g in range(n):
            peers = rng.choice(n - 1, size=r, replace=False)
            peers = peers + (peers >= g)
            noise = rng.standard_normal(r) * noise_sd[g]
            scores = cohort.scale.clamp(quality[peers] + bias[g] + noise)
            records.extend(
                GradeRecord(assignment=assignment, grader=students[g], gradee=students[p], score=float(s))
                for p, s in zip(peers.tolist(), scores.tolist(), strict=True)
            )
    logger.info("cohort_generated", records=len(records), seed=cohort.seed)
    return records


# ── Ground truth ────────────────────────────────────────────────────────────


def truth_frame(cohort: SyntheticCohort) -> pd.DataFrame:
    students = cohort.students
    return pd.DataFrame(
        {
            "student": students,
            "true_quality": [cohort.true_quality[s] for s in students],
            "grader_bias": [cohort.grader_bias[s] for s in students],
            "grader_noise_sd": [cohort.grader_noise_sd[s] for s in students],
        }
    )


def write_truth(cohort: SyntheticCohort, path: Path) -> Path:
    truth_frame(cohort).to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    return path


def read_truth(path: Path) -> dict[str, float]:
    """Student -> true quality from a CSV with columns student,true_quality."""
    frame = pd.read_csv(path, dtype={"student": str}, float_precision="round_trip")
    missing = {"student", "true_quality"} - set(frame.columns)
    if missing:
        raise ValueError(f"truth file lacks column(s): {', '.join(sorted(missing))}")
    return dict(zip(frame["student"].str.strip(), frame["true_quality"].astype(float), strict=True))


def kendall_tau(ranking_a: RankingResult | Mapping[str, float], ranking_b: Mapping[str, float]) -> float:
    """Kendall tau-b over the students scored by both rankings."""
    scores_a = ranking_a.scores if isinstance(ranking_a, RankingResult) else ranking_a
    shared = sorted(set(scores_a) & set(ranking_b))
    if len(shared) < 2:
        raise ValueError(f"kendall tau needs at least 2 shared students, got {len(shared)}")
    tau = kendalltau([scores_a[s] for s in shared], [ranking_b[s] for s in shared], variant="b").statistic
    if np.isnan(tau):
        raise ValueError("kendall tau is undefined when one ranking is constant")
    return float(tau)
