"""
HodgeRank solver — minimum-norm least-squares potential on a comparison graph.

Solves  min_s Σ_{(i,j)∈E} w_ij (s_j - s_i - Ȳ_ij)^2  through the normal equation
Δ0 s = -div Ȳ. On each connected component the solution with zero mean is the
one picked by the Moore-Penrose pseudoinverse, s* = -Δ0^† div Ȳ.
"""

from __future__ import annotations

from collections.abc import Callable
from enum import Enum

import numpy as np
import structlog
from scipy.sparse import coo_matrix, csr_matrix

from models.core.src.errors import SolverError
from models.core.src.types import ComparisonGraph, EdgeFlow, MethodTag, RankingResult, WeightMatrix
from models.hodgerank.src.graph import connected_components

logger = structlog.get_logger()

CG_TOLERANCE = 1e-10
DENSE_FALLBACK_LIMIT = 200
NORMAL_EQUATION_TOLERANCE = 1e-8


class SolverKind(str, Enum):
    CG = "cg"
    DENSE = "dense"


def weighted_inner_product(x: EdgeFlow, z: EdgeFlow, weights: WeightMatrix) -> float:
    """⟨X, Z⟩_w = Σ w_ij X_ij Z_ij over unordered edges, each counted once."""
    if not x.n == z.n == weights.n:
        raise ValueError("flows and weights must share one vertex universe")
    edges = weights.pairs
    return float(np.sum(weights.values * x.on_pairs(edges) * z.on_pairs(edges)))


def weighted_norm_sq(values: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(weights * values * values))


def laplacian(graph: ComparisonGraph) -> csr_matrix:
    """Δ0: weighted degree on the diagonal, -w_ij off the diagonal."""
    n, heads, tails, w = graph.n, graph.edges[:, 0], graph.edges[:, 1], graph.edge_weights
    diagonal = np.bincount(heads, weights=w, minlength=n) + np.bincount(tails, weights=w, minlength=n)
    rows = np.concatenate([heads, tails, np.arange(n)])
    cols = np.concatenate([tails, heads, np.arange(n)])
    data = np.concatenate([-w, -w, diagonal])
    return coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def divergence(graph: ComparisonGraph) -> np.ndarray:
    """div(Ȳ)(i) = Σ_j w_ij Ȳ_ij."""
    n, heads, tails = graph.n, graph.edges[:, 0], graph.edges[:, 1]
    outflow = graph.edge_weights * graph.edge_flow
    return np.bincount(heads, weights=outflow, minlength=n) - np.bincount(tails, weights=outflow, minlength=n)


def gradient(scores: np.ndarray, graph: ComparisonGraph) -> EdgeFlow:
    """(grad s)(i, j) = s_j - s_i on every edge."""
    values = scores[graph.edges[:, 1]] - scores[graph.edges[:, 0]]
    return EdgeFlow(graph.n, graph.edges, values)


def _project_mean_zero(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def conjugate_gradient(
    matvec: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    *,
    tol: float = CG_TOLERANCE,
    max_iter: int,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, int]:
    """CG for a symmetric positive semidefinite operator, started from zero.

    For a consistent right-hand side the iterates stay in the operator's range, so
    the limit is the minimum-norm solution. `project` keeps the residual in a
    subspace (e.g. mean-zero vectors) when rounding would otherwise leak into the kernel.
    Stops when ||r|| <= tol * ||rhs||.
    """
    keep = project or (lambda v: v)
    b = keep(rhs)
    b_norm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if b_norm == 0.0:
        return x, 0

    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    threshold = (tol * b_norm) ** 2
    for iteration in range(1, max_iter + 1):
        ap = keep(matvec(p))
        curvature = float(p @ ap)
        if curvature <= 0.0:
            break
        alpha = rr / curvature
        x += alpha * p
        r = keep(r - alpha * ap)
        rr_next = float(r @ r)
        if rr_next <= threshold:
            return keep(x), iteration
        p = r + (rr_next / rr) * p
        rr = rr_next

    achieved = float(np.linalg.norm(keep(matvec(x)) - b)) / b_norm
    raise SolverError("conjugate gradient did not converge", achieved_residual=achieved, iterations=max_iter)


def dense_min_norm(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Pseudoinverse solve through the symmetric eigendecomposition."""
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    cutoff = max(float(np.abs(eigenvalues).max(initial=0.0)), 1.0) * matrix.shape[0] * np.finfo(float).eps * 10
    inverse = np.zeros_like(eigenvalues)
    significant = np.abs(eigenvalues) > cutoff
    inverse[significant] = 1.0 / eigenvalues[significant]
    return eigenvectors @ (inverse * (eigenvectors.T @ rhs))


def _solve_component(
    operator: csr_matrix, rhs: np.ndarray, solver: SolverKind, tol: float, total_n: int
) -> tuple[np.ndarray, int]:
    if solver == SolverKind.DENSE:
        return dense_min_norm(operator.toarray(), _project_mean_zero(rhs)), 0
    try:
        return conjugate_gradient(
            operator.dot, rhs, tol=tol, max_iter=10 * operator.shape[0], project=_project_mean_zero
        )
    except SolverError as exc:
        if total_n > DENSE_FALLBACK_LIMIT:
            logger.error("hodgerank_cg_failed", error=str(exc), size=operator.shape[0])
            raise
        logger.warning("hodgerank_dense_fallback", error=str(exc), size=operator.shape[0])
        return dense_min_norm(operator.toarray(), _project_mean_zero(rhs)), exc.iterations


def solve_hodgerank(
    graph: ComparisonGraph,
    *,
    solver: SolverKind = SolverKind.CG,
    tol: float = CG_TOLERANCE,
) -> RankingResult:
    """Minimum-norm HodgeRank scores, zero mean on every connected component."""
    if solver == SolverKind.DENSE and graph.n > DENSE_FALLBACK_LIMIT:
        raise ValueError(f"dense solver is limited to {DENSE_FALLBACK_LIMIT} students, got {graph.n}")

    labeling = connected_components(graph)
    lap = laplacian(graph)
    div = divergence(graph)
    rhs = -div

    logger.info("hodgerank_solve_start", students=graph.n, edges=graph.m, components=labeling.count, solver=solver.value)

    scores = np.zeros(graph.n)
    iterations = 0
    for label in range(labeling.count):
        members = labeling.members(label)
        if members.size < 2:
            continue
        block = lap[members][:, members]
        solution, used = _solve_component(block, rhs[members], solver, tol, graph.n)
        scores[members] = _project_mean_zero(solution)
        iterations += used

    violation = float(np.abs(lap @ scores + div).max(initial=0.0))
    bound = NORMAL_EQUATION_TOLERANCE * max(1.0, float(np.abs(div).max(initial=0.0)))
    if violation > bound:
        logger.error("hodgerank_normal_equation_violated", violation=violation, bound=bound)
        raise SolverError("normal equation not satisfied", achieved_residual=violation, iterations=iterations)

    residual = graph.edge_flow - gradient(scores, graph).values
    warnings: list[str] = []
    if labeling.count > 1:
        logger.warning("hodgerank_disconnected_graph", components=labeling.count, students=graph.n)
        warnings.append(
            f"comparison graph has {labeling.count} connected components; "
            "scores are comparable only within a component"
        )

    result = RankingResult(
        method_tag=MethodTag.HODGERANK,
        scores={sid: float(v) for sid, v in zip(graph.vertices, scores, strict=True)},
        component_id=labeling.labels,
        residual_norm_sq=weighted_norm_sq(residual, graph.edge_weights),
        flow_norm_sq=weighted_norm_sq(graph.edge_flow, graph.edge_weights),
        warnings=warnings,
        converged=True,
        iterations=iterations,
    )
    logger.info(
        "hodgerank_solve_complete",
        iterations=iterations,
        residual_norm_sq=result.residual_norm_sq,
        flow_norm_sq=result.flow_norm_sq,
    )
    return result
