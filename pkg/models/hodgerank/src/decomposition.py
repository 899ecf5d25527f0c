"""
Combinatorial Hodge decomposition of the ranking residual.

Ȳ = grad s*  +  curl part  +  harmonic part

The curl part is the ⟨·,·⟩_w-orthogonal projection of the residual onto the
range of the adjoint of the triangle curl: flows W^{-1} C^T φ, where C maps an
edge flow to its circulation around every 3-clique (i < j < k, orientation
i→j→k→i). What is left, the harmonic part, is divergence-free and curl-free on
every triangle: inconsistency that only shows up around longer cycles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog
from pydantic import BaseModel, Field
from scipy.sparse import coo_matrix, csr_matrix

from models.core.src.errors import NoComparisonSignalError
from models.core.src.types import ComparisonGraph, EdgeFlow, MethodTag, RankingResult, TriangleCurl
from models.hodgerank.src.solver import CG_TOLERANCE, conjugate_gradient, gradient, weighted_norm_sq

logger = structlog.get_logger()


class FlowNorms(BaseModel):
    """Weighted squared norms ||·||²_w of the decomposition parts."""

    gradient: float = Field(ge=0.0)
    curl: float = Field(ge=0.0)
    harmonic: float = Field(ge=0.0)
    total: float = Field(ge=0.0, description="||Ȳ||²_w")


class InconsistencyMetrics(BaseModel):
    global_ratio: float = Field(ge=0.0, le=1.0, description="(curl + harmonic) / total")
    curl_ratio: float = Field(ge=0.0, le=1.0)
    harmonic_ratio: float = Field(ge=0.0, le=1.0)
    gradient_ratio: float = Field(ge=0.0, le=1.0)


@dataclass(frozen=True)
class HodgeDecomposition:
    graph: ComparisonGraph
    gradient_flow: EdgeFlow
    curl_flow: EdgeFlow
    harmonic_flow: EdgeFlow
    norms: FlowNorms
    triangle_count: int
    iterations: int = 0


# ── Triangles ───────────────────────────────────────────────────────────────


def enumerate_triangles(graph: ComparisonGraph) -> np.ndarray:
    """All 3-cliques of E as rows (i, j, k), i < j < k, in lexicographic order."""
    n = graph.n
    upper = np.zeros((n, n), dtype=bool)
    upper[graph.edges[:, 0], graph.edges[:, 1]] = True
    chunks = []
    for i in range(n):
        neighbours = np.flatnonzero(upper[i])
        if neighbours.size < 2:
            continue
        a, b = np.nonzero(upper[np.ix_(neighbours, neighbours)])
        if a.size:
            chunks.append(np.column_stack([np.full(a.size, i), neighbours[a], neighbours[b]]))
    if not chunks:
        return np.zeros((0, 3), dtype=np.int64)
    return np.concatenate(chunks).astype(np.int64)


def _edge_ids(graph: ComparisonGraph) -> np.ndarray:
    ids = np.full((graph.n, graph.n), -1, dtype=np.int64)
    ids[graph.edges[:, 0], graph.edges[:, 1]] = np.arange(graph.m)
    return ids


def curl_operator(graph: ComparisonGraph, triangles: np.ndarray) -> csr_matrix:
    """C with (C x)_t = x_ij + x_jk - x_ik for triangle t = (i, j, k)."""
    ids = _edge_ids(graph)
    i, j, k = triangles[:, 0], triangles[:, 1], triangles[:, 2]
    t = np.arange(triangles.shape[0])
    rows = np.concatenate([t, t, t])
    cols = np.concatenate([ids[i, j], ids[j, k], ids[i, k]])
    data = np.concatenate([np.ones(t.size), np.ones(t.size), -np.ones(t.size)])
    return coo_matrix((data, (rows, cols)), shape=(t.size, graph.m)).tocsr()


def triangle_curl_values(flow: EdgeFlow, graph: ComparisonGraph) -> tuple[np.ndarray, np.ndarray]:
    """Triangles of the graph and the curl of `flow` on each (array form)."""
    triangles = enumerate_triangles(graph)
    if triangles.shape[0] == 0:
        return triangles, np.zeros(0)
    on_edges = flow.on_pairs(graph.edges)
    return triangles, curl_operator(graph, triangles) @ on_edges


def triangle_curl(flow: EdgeFlow, graph: ComparisonGraph) -> list[TriangleCurl]:
    triangles, values = triangle_curl_values(flow, graph)
    names = graph.vertices
    return [
        TriangleCurl((names[i], names[j], names[k]), float(v))
        for (i, j, k), v in zip(triangles.tolist(), values, strict=True)
    ]


def top_triangles(flow: EdgeFlow, graph: ComparisonGraph, k: int) -> list[TriangleCurl]:
    """The k triangles with the largest |curl|; ties keep triangle order."""
    triangles, values = triangle_curl_values(flow, graph)
    order = np.argsort(-np.abs(values), kind="stable")[:k]
    names = graph.vertices
    return [
        TriangleCurl(tuple(names[v] for v in triangles[t]), float(values[t]))  # type: ignore[arg-type]
        for t in order
    ]


# ── Decomposition ───────────────────────────────────────────────────────────


def _scores_vector(graph: ComparisonGraph, ranking: RankingResult) -> np.ndarray:
    if ranking.method_tag != MethodTag.HODGERANK:
        raise ValueError(f"decomposition needs a HodgeRank result, got {ranking.method_tag.value}")
    try:
        return np.array([ranking.scores[sid] for sid in graph.vertices])
    except KeyError as exc:
        raise ValueError(f"ranking has no score for student {exc.args[0]!r}") from exc


def decompose_residual(graph: ComparisonGraph, ranking: RankingResult) -> HodgeDecomposition:
    y, w = graph.edge_flow, graph.edge_weights
    grad = gradient(_scores_vector(graph, ranking), graph)
    residual = y - grad.values

    triangles = enumerate_triangles(graph)
    curl_values = np.zeros(graph.m)
    iterations = 0
    if triangles.shape[0]:
        c = curl_operator(graph, triangles)
        c_t = c.T.tocsr()
        inverse_w = 1.0 / w
        potentials, iterations = conjugate_gradient(
            lambda phi: c @ (inverse_w * (c_t @ phi)),
            c @ residual,
            tol=CG_TOLERANCE,
            max_iter=max(10 * triangles.shape[0], 100),
        )
        curl_values = inverse_w * (c_t @ potentials)
    harmonic_values = residual - curl_values

    norms = FlowNorms(
        gradient=weighted_norm_sq(grad.values, w),
        curl=weighted_norm_sq(curl_values, w),
        harmonic=weighted_norm_sq(harmonic_values, w),
        total=weighted_norm_sq(y, w),
    )
    logger.info(
        "hodge_decomposition_complete",
        triangles=int(triangles.shape[0]),
        iterations=iterations,
        curl_norm_sq=norms.curl,
        harmonic_norm_sq=norms.harmonic,
    )
    return HodgeDecomposition(
        graph=graph,
        gradient_flow=grad,
        curl_flow=EdgeFlow(graph.n, graph.edges, curl_values),
        harmonic_flow=EdgeFlow(graph.n, graph.edges, harmonic_values),
        norms=norms,
        triangle_count=int(triangles.shape[0]),
        iterations=iterations,
    )


def inconsistency_metrics(decomposition: HodgeDecomposition) -> InconsistencyMetrics:
    norms = decomposition.norms
    if norms.total <= 0.0:
        raise NoComparisonSignalError()

    def ratio(part: float) -> float:
        return min(1.0, max(0.0, part / norms.total))

    curl_ratio = ratio(norms.curl)
    harmonic_ratio = ratio(norms.harmonic)
    global_ratio = ratio(norms.curl + norms.harmonic)
    return InconsistencyMetrics(
        global_ratio=global_ratio,
        curl_ratio=curl_ratio,
        harmonic_ratio=harmonic_ratio,
        gradient_ratio=ratio(norms.gradient),
    )
