"""
Core domain types — grading events, pairwise flows, comparison graphs, rankings.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator


class MethodTag(str, Enum):
    HODGERANK = "hodgerank"
    CUMULATIVE_AVG = "cumulative_avg"
    TRUNCATED_AVG = "truncated_avg"
    PEERRANK = "peerrank"


class TiePolicy(str, Enum):
    INCLUDE = "include"
    PAPER_STRICT = "paper-strict"


class AggregateMode(str, Enum):
    MEAN = "mean"
    SUM = "sum"


class ScoreScale(BaseModel):
    """Declared grading scale; hundred-mark by default."""

    model_config = ConfigDict(frozen=True)

    low: float = 0.0
    high: float = 100.0

    @model_validator(mode="after")
    def _check_bounds(self) -> ScoreScale:
        if not self.high > self.low:
            raise ValueError(f"scale upper bound {self.high} must exceed lower bound {self.low}")
        return self

    def contains(self, score: float) -> bool:
        return self.low <= score <= self.high

    def normalize(self, score: float | np.ndarray) -> float | np.ndarray:
        return (score - self.low) / (self.high - self.low)

    def clamp(self, scores: np.ndarray) -> np.ndarray:
        return np.clip(scores, self.low, self.high)

    def label(self) -> str:
        return f"[{self.low:g},{self.high:g}]"


class GradeRecord(BaseModel):
    """One grading event: `grader` scored the submission of `gradee` for `assignment`."""

    model_config = ConfigDict(frozen=True, str_strip_whitespace=True)

    assignment: str = Field(min_length=1, description="Assignment identifier")
    grader: str = Field(min_length=1, description="Student who gave the grade")
    gradee: str = Field(min_length=1, description="Student whose work was graded")
    score: float = Field(allow_inf_nan=False, description="Score on the declared scale")

    @model_validator(mode="after")
    def _reject_self_grade(self) -> GradeRecord:
        if self.grader == self.gradee:
            raise ValueError("self-grade")
        return self


@dataclass(frozen=True)
class VertexIndex:
    """Opaque student ids mapped to dense indices 0..n-1 in first-appearance order."""

    ids: tuple[str, ...]
    positions: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        positions = {sid: k for k, sid in enumerate(self.ids)}
        if len(positions) != len(self.ids):
            raise ValueError("duplicate student ids in vertex index")
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_records(cls, records: Iterable[GradeRecord]) -> VertexIndex:
        seen: dict[str, None] = {}
        for record in records:
            seen.setdefault(record.grader)
            seen.setdefault(record.gradee)
        return cls(tuple(seen))

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, sid: object) -> bool:
        return sid in self.positions

    def index_of(self, sid: str) -> int:
        return self.positions[sid]


def records_frame(records: Sequence[GradeRecord], universe: VertexIndex | None = None) -> pd.DataFrame:
    """Records as a frame with dense grader/gradee indices (`gi`, `ei`) over `universe`."""
    universe = universe or VertexIndex.from_records(records)
    frame = pd.DataFrame(
        {
            "assignment": [r.assignment for r in records],
            "grader": [r.grader for r in records],
            "gradee": [r.gradee for r in records],
            "score": np.fromiter((r.score for r in records), dtype=np.float64, count=len(records)),
        }
    )
    frame["gi"] = frame["grader"].map(universe.positions).astype(np.int64)
    frame["ei"] = frame["gradee"].map(universe.positions).astype(np.int64)
    return frame


# ── Pairwise tables ─────────────────────────────────────────────────────────


def _canonical_pairs(
    n: int, heads: np.ndarray, tails: np.ndarray, values: np.ndarray, *, skew: bool
) -> tuple[np.ndarray, np.ndarray]:
    heads = np.asarray(heads, dtype=np.int64).reshape(-1)
    tails = np.asarray(tails, dtype=np.int64).reshape(-1)
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if not heads.size == tails.size == values.size:
        raise ValueError("pair arrays must have equal length")
    if heads.size and (min(heads.min(), tails.min()) < 0 or max(heads.max(), tails.max()) >= n):
        raise ValueError(f"vertex index out of range for n={n}")

    diagonal = heads == tails
    if np.any(values[diagonal] != 0.0):
        raise ValueError("diagonal entries must be zero")
    keep = ~diagonal
    heads, tails, values = heads[keep], tails[keep], values[keep]

    swap = heads > tails
    lo = np.where(swap, tails, heads)
    hi = np.where(swap, heads, tails)
    if skew:
        values = np.where(swap, -values, values)

    order = np.lexsort((hi, lo))
    pairs = np.column_stack([lo[order], hi[order]])
    values = values[order]
    if pairs.shape[0] > 1 and np.any(np.all(pairs[1:] == pairs[:-1], axis=1)):
        raise ValueError("duplicate pair entries")
    return pairs.reshape(-1, 2), values


@dataclass(frozen=True)
class _PairTable:
    n: int
    pairs: np.ndarray  # (m, 2), pairs[:, 0] < pairs[:, 1], lexicographic
    values: np.ndarray  # (m,)

    @cached_property
    def _keys(self) -> np.ndarray:
        return self.pairs[:, 0] * self.n + self.pairs[:, 1]

    def __len__(self) -> int:
        return int(self.pairs.shape[0])

    def _lookup(self, heads: np.ndarray, tails: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Stored values for the canonical pairs (min, max) of the queries, 0 where absent."""
        lo = np.minimum(heads, tails)
        hi = np.maximum(heads, tails)
        keys = lo * self.n + hi
        found = np.zeros(keys.shape, dtype=np.float64)
        if len(self):
            slot = np.searchsorted(self._keys, keys)
            slot = np.minimum(slot, len(self) - 1)
            hit = (self._keys[slot] == keys) & (lo != hi)
            found[hit] = self.values[slot[hit]]
        return found, heads > tails


@dataclass(frozen=True)
class EdgeFlow(_PairTable):
    """Skew-symmetric function on ordered vertex pairs; value(j, i) == -value(i, j)."""

    @classmethod
    def from_arrays(cls, n: int, heads, tails, values) -> EdgeFlow:
        pairs, vals = _canonical_pairs(n, heads, tails, values, skew=True)
        return cls(n, pairs, vals)

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[tuple[int, int, float]]) -> EdgeFlow:
        rows = list(entries)
        if not rows:
            return cls.zeros(n)
        heads, tails, values = zip(*rows, strict=True)
        return cls.from_arrays(n, heads, tails, values)

    @classmethod
    def zeros(cls, n: int) -> EdgeFlow:
        return cls(n, np.zeros((0, 2), dtype=np.int64), np.zeros(0))

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> EdgeFlow:
        matrix = np.asarray(matrix, dtype=np.float64)
        if not np.array_equal(matrix, -matrix.T):
            raise ValueError("flow matrix is not skew-symmetric")
        heads, tails = np.nonzero(np.triu(matrix, k=1))
        return cls.from_arrays(matrix.shape[0], heads, tails, matrix[heads, tails])

    def value(self, i: int, j: int) -> float:
        found, flipped = self._lookup(np.array([i]), np.array([j]))
        return float(-found[0] if flipped[0] else found[0])

    def on_pairs(self, pairs: np.ndarray) -> np.ndarray:
        """Values at the ordered pairs (i, j) given row-wise."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        found, flipped = self._lookup(pairs[:, 0], pairs[:, 1])
        return np.where(flipped, -found, found)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        dense[self.pairs[:, 0], self.pairs[:, 1]] = self.values
        dense[self.pairs[:, 1], self.pairs[:, 0]] = -self.values
        return dense


@dataclass(frozen=True)
class WeightMatrix(_PairTable):
    """Symmetric nonnegative weights on unordered pairs, zero diagonal."""

    def __post_init__(self) -> None:
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("weights must be finite and nonnegative")

    @classmethod
    def from_arrays(cls, n: int, heads, tails, values) -> WeightMatrix:
        pairs, vals = _canonical_pairs(n, heads, tails, values, skew=False)
        return cls(n, pairs, vals)

    @classmethod
    def zeros(cls, n: int) -> WeightMatrix:
        return cls(n, np.zeros((0, 2), dtype=np.int64), np.zeros(0))

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> WeightMatrix:
        matrix = np.asarray(matrix, dtype=np.float64)
        if not np.array_equal(matrix, matrix.T):
            raise ValueError("weight matrix is not symmetric")
        heads, tails = np.nonzero(np.triu(matrix, k=1))
        return cls.from_arrays(matrix.shape[0], heads, tails, matrix[heads, tails])

    def weight(self, i: int, j: int) -> float:
        found, _ = self._lookup(np.array([i]), np.array([j]))
        return float(found[0])

    def on_pairs(self, pairs: np.ndarray) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        found, _ = self._lookup(pairs[:, 0], pairs[:, 1])
        return found

    def positive(self) -> WeightMatrix:
        keep = self.values > 0
        return WeightMatrix(self.n, self.pairs[keep], self.values[keep])


@dataclass(frozen=True)
class ComparisonGraph:
    """Students, aggregated flow Ȳ and weights W; E is the set of pairs with positive weight.

    `flow` and `weights` are stored on exactly the edge list E, in the same order.
    Connectivity is not assumed; see connected_components.
    """

    vertices: tuple[str, ...]
    flow: EdgeFlow
    weights: WeightMatrix

    def __post_init__(self) -> None:
        n = len(self.vertices)
        if self.flow.n != n or self.weights.n != n:
            raise ValueError("flow, weights and vertices disagree on the vertex count")
        if not np.array_equal(self.flow.pairs, self.weights.pairs):
            raise ValueError("flow must be stored on the edge list of the weights")
        if np.any(self.weights.values <= 0):
            raise ValueError("comparison graph edges must have positive weight")

    @classmethod
    def build(cls, vertices: Sequence[str], flow: EdgeFlow, weights: WeightMatrix) -> ComparisonGraph:
        """Restrict to positive-weight pairs; a nonzero flow off those pairs is rejected."""
        edges = weights.positive()
        supported = edges.on_pairs(flow.pairs) > 0
        if np.any(flow.values[~supported] != 0.0):
            raise ValueError("flow is nonzero on a pair with zero weight")
        return cls(tuple(vertices), EdgeFlow(edges.n, edges.pairs, flow.on_pairs(edges.pairs)), edges)

    @classmethod
    def from_matrices(
        cls, flow: np.ndarray, weights: np.ndarray, vertices: Sequence[str] | None = None
    ) -> ComparisonGraph:
        y = EdgeFlow.from_dense(flow)
        w = WeightMatrix.from_dense(weights)
        names = tuple(vertices) if vertices is not None else tuple(str(k) for k in range(y.n))
        return cls.build(names, y, w)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def edges(self) -> np.ndarray:
        return self.weights.pairs

    @property
    def edge_weights(self) -> np.ndarray:
        return self.weights.values

    @property
    def edge_flow(self) -> np.ndarray:
        return self.flow.values

    def with_flow(self, flow: EdgeFlow) -> ComparisonGraph:
        return ComparisonGraph.build(self.vertices, flow, self.weights)


@dataclass(frozen=True)
class ComponentLabeling:
    vertices: tuple[str, ...]
    index_labels: np.ndarray
    count: int

    @property
    def labels(self) -> dict[str, int]:
        return {sid: int(label) for sid, label in zip(self.vertices, self.index_labels, strict=True)}

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.index_labels == label)


@dataclass(frozen=True)
class TriangleCurl:
    """Curl X_ij + X_jk + X_ki of a flow on a 3-clique, i < j < k by vertex index."""

    triangle: tuple[str, str, str]
    curl_value: float


# ── Rankings ────────────────────────────────────────────────────────────────


class RankedRow(BaseModel):
    rank: int
    student: str
    score: float
    component: int | None = None


class RankingResult(BaseModel):
    """Scores over students produced by one ranking method."""

    method_tag: MethodTag
    scores: dict[str, float] = Field(description="Student -> score (potential s for HodgeRank)")
    component_id: dict[str, int] = Field(default_factory=dict)
    residual_norm_sq: float = Field(0.0, ge=0.0)
    flow_norm_sq: float = Field(0.0, ge=0.0)

    missing: list[str] = Field(default_factory=list, description="Students without a score")
    flags: dict[str, str] = Field(default_factory=dict, description="Per-student caveats")
    warnings: list[str] = Field(default_factory=list)

    converged: bool | None = None
    iterations: int | None = None

    @model_validator(mode="after")
    def _check_norms(self) -> RankingResult:
        if self.method_tag == MethodTag.HODGERANK:
            tolerance = 1e-9 * max(1.0, self.flow_norm_sq)
            if self.residual_norm_sq > self.flow_norm_sq + tolerance:
                raise ValueError("residual norm exceeds flow norm")
        return self

    def ranked(self) -> list[RankedRow]:
        """Rows by descending score; equal scores share the minimum rank, ordered by student id."""
        if not self.scores:
            return []
        table = pd.DataFrame({"student": list(self.scores), "score": list(self.scores.values())})
        table["rank"] = table["score"].rank(method="min", ascending=False).astype(np.int64)
        table = table.sort_values(by=["rank", "student"], kind="mergesort").reset_index(drop=True)
        return [
            RankedRow(
                rank=int(row.rank),
                student=row.student,
                score=float(row.score),
                component=self.component_id.get(row.student),
            )
            for row in table.itertuples(index=False)
        ]
