"""
Comparison graph builder — per-assignment pairwise flows, aggregation, connectivity.

Comparisons are formed only within one grader and one assignment: if grader g
scored both i and j, the difference score_g(j) - score_g(i) is one comparison
on (i, j). A constant offset in everything g gives cancels out of every
difference, which is what makes the ranking immune to lenient or harsh graders.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import pandas as pd
import structlog

from models.core.src.errors import UnknownAssignmentError
from models.core.src.types import (
    AggregateMode,
    ComparisonGraph,
    ComponentLabeling,
    EdgeFlow,
    GradeRecord,
    TiePolicy,
    VertexIndex,
    WeightMatrix,
    records_frame,
)

logger = structlog.get_logger()


def _comparisons(frame: pd.DataFrame, tie_policy: TiePolicy) -> pd.DataFrame:
    """Every within-grader pair (i < j) of one assignment with its score difference."""
    left = frame[["assignment", "grader", "ei", "score"]]
    pairs = left.merge(left, on=["assignment", "grader"], suffixes=("_i", "_j"))
    pairs = pairs[pairs["ei_i"] < pairs["ei_j"]]
    comparisons = pd.DataFrame(
        {
            "assignment": pairs["assignment"].to_numpy(),
            "i": pairs["ei_i"].to_numpy(),
            "j": pairs["ei_j"].to_numpy(),
            "diff": pairs["score_j"].to_numpy() - pairs["score_i"].to_numpy(),
        }
    )
    if tie_policy == TiePolicy.PAPER_STRICT:
        comparisons = comparisons[comparisons["diff"] != 0.0]
    return comparisons


def _flows_from_comparisons(comparisons: pd.DataFrame, n: int) -> tuple[EdgeFlow, WeightMatrix]:
    if comparisons.empty:
        return EdgeFlow.zeros(n), WeightMatrix.zeros(n)
    grouped = comparisons.groupby(["i", "j"], sort=True)["diff"].agg(["mean", "count"])
    heads = grouped.index.get_level_values("i").to_numpy()
    tails = grouped.index.get_level_values("j").to_numpy()
    return (
        EdgeFlow.from_arrays(n, heads, tails, grouped["mean"].to_numpy()),
        WeightMatrix.from_arrays(n, heads, tails, grouped["count"].to_numpy(dtype=np.float64)),
    )


def pairwise_flows(
    records: Sequence[GradeRecord],
    assignment: str,
    *,
    universe: VertexIndex | None = None,
    tie_policy: TiePolicy = TiePolicy.INCLUDE,
) -> tuple[EdgeFlow, WeightMatrix]:
    """Y^α (mean within-grader difference per pair) and W^α (number of contributing comparisons)."""
    universe = universe or VertexIndex.from_records(records)
    frame = records_frame(records, universe)
    frame = frame[frame["assignment"] == assignment]
    return _flows_from_comparisons(_comparisons(frame, tie_policy), len(universe))


def aggregate(
    flows: Sequence[tuple[EdgeFlow, WeightMatrix]],
    *,
    mode: AggregateMode = AggregateMode.MEAN,
    vertices: Sequence[str] | None = None,
) -> ComparisonGraph:
    """W = Σ_α W^α; Ȳ is the W^α-weighted mean of Y^α (mode=mean) or the raw sum Σ_α Y^α (mode=sum)."""
    if vertices is None and not flows:
        raise ValueError("aggregate needs at least one flow or an explicit vertex list")
    n = len(vertices) if vertices is not None else flows[0][0].n
    names = tuple(vertices) if vertices is not None else tuple(str(k) for k in range(n))
    if any(y.n != n or w.n != n for y, w in flows):
        raise ValueError("all flows must share one vertex universe")

    # Union of pairs across assignments, aligned per assignment.
    keys = [w.pairs[:, 0] * n + w.pairs[:, 1] for _, w in flows]
    keys.extend(y.pairs[:, 0] * n + y.pairs[:, 1] for y, _ in flows)
    union = np.unique(np.concatenate(keys)) if keys else np.zeros(0, dtype=np.int64)
    pairs = np.column_stack([union // n, union % n]).astype(np.int64).reshape(-1, 2)

    total_weight = np.zeros(len(union))
    total_flow = np.zeros(len(union))
    for y, w in flows:
        w_alpha = w.on_pairs(pairs)
        y_alpha = y.on_pairs(pairs)
        total_weight += w_alpha
        total_flow += w_alpha * y_alpha if mode == AggregateMode.MEAN else y_alpha

    edges = total_weight > 0
    values = np.zeros(len(union))
    if mode == AggregateMode.MEAN:
        values[edges] = total_flow[edges] / total_weight[edges]
    else:
        values[edges] = total_flow[edges]

    weights = WeightMatrix(n, pairs[edges], total_weight[edges])
    return ComparisonGraph(names, EdgeFlow(n, pairs[edges], values[edges]), weights)


def build_graph(
    records: Sequence[GradeRecord],
    *,
    tie_policy: TiePolicy = TiePolicy.INCLUDE,
    mode: AggregateMode = AggregateMode.MEAN,
    universe: VertexIndex | None = None,
) -> ComparisonGraph:
    """Aggregate every assignment's flows over all students appearing in the records."""
    universe = universe or VertexIndex.from_records(records)
    n = len(universe)
    comparisons = _comparisons(records_frame(records, universe), tie_policy)
    flows = [
        _flows_from_comparisons(group, n)
        for _, group in comparisons.groupby("assignment", sort=True)
    ]
    graph = aggregate(flows, mode=mode, vertices=universe.ids)
    logger.info(
        "comparison_graph_built",
        students=n,
        assignments=len(flows),
        comparisons=len(comparisons),
        edges=graph.m,
        tie_policy=tie_policy.value,
        aggregate=mode.value,
    )
    return graph


# ── Connectivity ────────────────────────────────────────────────────────────


class UnionFind:
    """Disjoint sets over 0..size-1 with path halving and union by size."""

    def __init__(self, size: int):
        self._parent = list(range(size))
        self._size = [1] * size
        self.components = size

    def find(self, x: int) -> int:
        parent = self._parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> bool:
        root_x, root_y = self.find(x), self.find(y)
        if root_x == root_y:
            return False
        if self._size[root_x] < self._size[root_y]:
            root_x, root_y = root_y, root_x
        self._parent[root_y] = root_x
        self._size[root_x] += self._size[root_y]
        self.components -= 1
        return True

    def union_pairs(self, pairs: np.ndarray) -> None:
        for x, y in pairs.tolist():
            self.union(x, y)

    def labels(self) -> np.ndarray:
        """Dense labels 0..k-1, numbered by the smallest vertex of each set."""
        roots = [self.find(x) for x in range(len(self._parent))]
        numbering: dict[int, int] = {}
        return np.array([numbering.setdefault(root, len(numbering)) for root in roots], dtype=np.int64)


def connected_components(graph: ComparisonGraph) -> ComponentLabeling:
    forest = UnionFind(graph.n)
    forest.union_pairs(graph.edges)
    return ComponentLabeling(graph.vertices, forest.labels(), forest.components)


def component_trajectory(
    records: Sequence[GradeRecord],
    ordering: Sequence[str],
    *,
    tie_policy: TiePolicy = TiePolicy.INCLUDE,
    universe: VertexIndex | None = None,
) -> list[int]:
    """Component count of the graph accumulated over the first t assignments, for t = 1..len(ordering)."""
    known = {r.assignment for r in records}
    unknown = [a for a in ordering if a not in known]
    if unknown:
        raise UnknownAssignmentError(unknown)
    if len(set(ordering)) != len(ordering):
        raise ValueError("assignment ordering lists an assignment twice")

    universe = universe or VertexIndex.from_records(records)
    comparisons = _comparisons(records_frame(records, universe), tie_policy)
    by_assignment = {a: group for a, group in comparisons.groupby("assignment", sort=False)}

    forest = UnionFind(len(universe))
    counts: list[int] = []
    for assignment in ordering:
        group = by_assignment.get(assignment)
        if group is not None:
            forest.union_pairs(group[["i", "j"]].drop_duplicates().to_numpy())
        counts.append(forest.components)
    logger.debug("component_trajectory", ordering=list(ordering), counts=counts)
    return counts
