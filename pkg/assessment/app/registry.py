"""
Method Registry — every ranking method the tool can run.

Each entry carries:
  - The command-line name and the tag written into results
  - A short description of what the method assumes about graders
"""

from __future__ import annotations

from collections.abc import Sequence

import structlog
from pydantic import BaseModel, Field

from assessment.app.config import RankingSettings
from models.baselines.src.averages import cumulative_average, truncated_average
from models.baselines.src.peerrank import peerrank
from models.core.src.types import GradeRecord, MethodTag, RankingResult
from models.hodgerank.src.graph import build_graph
from models.hodgerank.src.solver import solve_hodgerank

logger = structlog.get_logger()


class RankingMethod(BaseModel):
    name: str = Field(description="Name used on the command line")
    tag: MethodTag
    description: str


METHOD_REGISTRY: list[RankingMethod] = [
    RankingMethod(
        name="hodgerank",
        tag=MethodTag.HODGERANK,
        description="Least-squares potential fitted to within-grader score differences; immune to per-grader offsets",
    ),
    RankingMethod(
        name="avg",
        tag=MethodTag.CUMULATIVE_AVG,
        description="Mean of every score received across all assignments",
    ),
    RankingMethod(
        name="trimmed",
        tag=MethodTag.TRUNCATED_AVG,
        description="Mean after dropping the highest and lowest received scores",
    ),
    RankingMethod(
        name="peerrank",
        tag=MethodTag.PEERRANK,
        description="Fixed point in which a grade counts in proportion to its grader's own score",
    ),
]


def get_method_registry() -> list[RankingMethod]:
    return METHOD_REGISTRY


def get_method_by_name(name: str) -> RankingMethod | None:
    """Look up by command-line name or by result tag."""
    key = name.strip().lower()
    return next((m for m in METHOD_REGISTRY if key in (m.name, m.tag.value)), None)


def run_method(method: RankingMethod, records: Sequence[GradeRecord], settings: RankingSettings) -> RankingResult:
    logger.info("ranking_method_start", method=method.name, records=len(records))
    if method.tag == MethodTag.HODGERANK:
        graph = build_graph(records, tie_policy=settings.tie_policy, mode=settings.aggregate)
        return solve_hodgerank(graph, solver=settings.solver, tol=settings.cg_tol)
    if method.tag == MethodTag.CUMULATIVE_AVG:
        return cumulative_average(records)
    if method.tag == MethodTag.TRUNCATED_AVG:
        return truncated_average(records, settings.trim)
    return peerrank(
        records,
        alpha=settings.alpha,
        beta=settings.beta,
        tol=settings.peerrank_tol,
        max_iters=settings.peerrank_max_iters,
        scale=settings.scale,
        epsilon=settings.peerrank_epsilon,
    )
