"""
Average-based baselines — cumulative and truncated means of received scores.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import structlog

from models.core.src.types import GradeRecord, MethodTag, RankingResult, VertexIndex

logger = structlog.get_logger()


def _received(records: Sequence[GradeRecord]) -> tuple[VertexIndex, dict[str, list[float]]]:
    universe = VertexIndex.from_records(records)
    received: dict[str, list[float]] = {}
    for record in records:
        received.setdefault(record.gradee, []).append(record.score)
    return universe, received


def _mean(values: Sequence[float]) -> float:
    # fsum is exactly rounded, so the mean does not depend on record order
    return math.fsum(values) / len(values)


def cumulative_average(records: Sequence[GradeRecord]) -> RankingResult:
    universe, received = _received(records)
    scores = {sid: _mean(received[sid]) for sid in universe.ids if sid in received}
    missing = [sid for sid in universe.ids if sid not in received]
    if missing:
        logger.info("cumulative_average_missing", students=len(missing))
    return RankingResult(
        method_tag=MethodTag.CUMULATIVE_AVG,
        scores=scores,
        missing=missing,
        flags={sid: "never graded" for sid in missing},
    )


def truncated_average(records: Sequence[GradeRecord], trim: int = 1) -> RankingResult:
    """Mean after dropping `trim` lowest and `trim` highest scores per student."""
    if trim < 0:
        raise ValueError(f"trim must be >= 0, got {trim}")
    universe, received = _received(records)

    scores: dict[str, float] = {}
    flags: dict[str, str] = {}
    for sid in universe.ids:
        values = received.get(sid)
        if values is None:
            flags[sid] = "never graded"
            continue
        if len(values) < 2 * trim + 1:
            scores[sid] = _mean(values)
            flags[sid] = f"fallback to plain mean: {len(values)} score(s) < {2 * trim + 1}"
            continue
        ordered = sorted(values)
        scores[sid] = _mean(ordered[trim : len(ordered) - trim])

    missing = [sid for sid in universe.ids if sid not in received]
    fallbacks = len(flags) - len(missing)
    if fallbacks:
        logger.info("truncated_average_fallback", students=fallbacks, trim=trim)
    return RankingResult(method_tag=MethodTag.TRUNCATED_AVG, scores=scores, missing=missing, flags=flags)
