"""
PeerRank — grades weighted by the grader's own standing, solved by fixed-point iteration.

    X_i <- (1 - α - β) X_i
           + α Σ_{j∈G(i)} X_j A_ji / Σ_{j∈G(i)} X_j
           + β (1 - mean_{j∈ĝ(i)} |A_ij - X_j|)

G(i): graders of i; ĝ(i): students graded by i; A_ji: mean normalized grade j gave i
across all assignments. Iteration starts from the mean of each student's A column.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import structlog

from models.core.src.errors import DegenerateGraderMassError
from models.core.src.types import GradeRecord, MethodTag, RankingResult, ScoreScale, VertexIndex, records_frame

logger = structlog.get_logger()

PEERRANK_TOL = 1e-9
PEERRANK_MAX_ITERS = 1000
PEERRANK_INPUT_NOTE = (
    "PeerRank grade matrix A: per (grader, gradee) mean of all grades across assignments, "
    "normalized to [0,1] by the declared scale"
)


def _participants(records: Sequence[GradeRecord]) -> tuple[list[GradeRecord], list[str]]:
    """Drop students who never received a grade, and the grades they gave, until stable."""
    universe = VertexIndex.from_records(records)
    kept = list(records)
    while True:
        graded = {r.gradee for r in kept}
        pruned = [r for r in kept if r.grader in graded]
        if len(pruned) == len(kept):
            break
        kept = pruned
    graded = {r.gradee for r in kept}
    return kept, [sid for sid in universe.ids if sid not in graded]


def peerrank(
    records: Sequence[GradeRecord],
    *,
    alpha: float = 0.5,
    beta: float = 0.0,
    tol: float = PEERRANK_TOL,
    max_iters: int = PEERRANK_MAX_ITERS,
    scale: ScoreScale | None = None,
    epsilon: float | None = None,
) -> RankingResult:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not 0.0 <= beta <= 1.0 - alpha:
        raise ValueError(f"beta must lie in [0, 1 - alpha], got {beta}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    scale = scale or ScoreScale()

    kept, missing = _participants(records)
    warnings: list[str] = []
    if len(kept) < len(records):
        warnings.append(
            f"{len(records) - len(kept)} grade(s) ignored: given by students who never received a grade"
        )
    universe = VertexIndex.from_records(kept)
    students = universe.ids
    n = len(students)
    if n == 0:
        return RankingResult(method_tag=MethodTag.PEERRANK, scores={}, missing=missing, warnings=warnings)

    frame = records_frame(kept, universe)
    pair_means = frame.groupby(["gi", "ei"], sort=True)["score"].mean()
    graders = pair_means.index.get_level_values("gi").to_numpy()
    gradees = pair_means.index.get_level_values("ei").to_numpy()
    grades = np.zeros((n, n))  # grades[j, i] = A_ji
    given = np.zeros((n, n), dtype=bool)
    grades[graders, gradees] = scale.normalize(pair_means.to_numpy())
    given[graders, gradees] = True

    received_count = given.sum(axis=0)
    given_count = given.sum(axis=1)
    x = grades.sum(axis=0) / received_count

    flags: dict[str, str] = {sid: "never graded" for sid in missing}
    no_peers = given_count == 0
    if beta > 0 and np.any(no_peers):
        for k in np.flatnonzero(no_peers):
            flags[students[k]] = "graded nobody: accuracy term set to 0"

    weighted_grades = np.where(given, grades, 0.0)
    converged = False
    iteration = 0
    logger.info("peerrank_start", students=n, alpha=alpha, beta=beta, tol=tol, max_iters=max_iters)
    for iteration in range(1, max_iters + 1):
        mass = given.T.astype(np.float64) @ x
        if epsilon is None and np.any(mass == 0.0):
            student = students[int(np.flatnonzero(mass == 0.0)[0])]
            logger.error("peerrank_degenerate_mass", student=student, iteration=iteration)
            raise DegenerateGraderMassError(student, iteration)
        consensus = (weighted_grades.T @ x) / (mass + (epsilon or 0.0))

        accuracy = np.zeros(n)
        if beta > 0:
            disagreement = np.where(given, np.abs(grades - x[np.newaxis, :]), 0.0).sum(axis=1)
            has_peers = ~no_peers
            accuracy[has_peers] = 1.0 - disagreement[has_peers] / given_count[has_peers]

        x_next = (1.0 - alpha - beta) * x + alpha * consensus + beta * accuracy
        delta = float(np.abs(x_next - x).max())
        x = x_next
        if delta < tol:
            converged = True
            break

    if not converged:
        logger.warning("peerrank_not_converged", iterations=iteration, tol=tol)
        warnings.append(f"PeerRank did not converge within {max_iters} iterations (tol {tol:g})")
    logger.info("peerrank_complete", iterations=iteration, converged=converged)

    return RankingResult(
        method_tag=MethodTag.PEERRANK,
        scores={sid: float(v) for sid, v in zip(students, x, strict=True)},
        missing=missing,
        flags=flags,
        warnings=warnings,
        converged=converged,
        iterations=iteration,
    )
