"""
Method comparison report — normalized ranking curves against the steady line.

Every method's scores are mapped linearly onto [0, 1], sorted ascending and
paired with the quantiles u_k = k/(n-1). The steady line is the diagonal
value = u: the curve of a ranking whose scores are spread perfectly evenly.
A curve above it at interior quantiles means scores bunched towards the top,
which is what lenient grading does to plain averages.

Outputs: report.json, curves.csv (method, quantile, value) and curves.svg.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from itertools import combinations
from pathlib import Path

import numpy as np
import orjson
import pandas as pd
import structlog
from jinja2 import Environment, FileSystemLoader, select_autoescape
from pydantic import BaseModel, Field
from scipy.stats import kurtosis, skew

from assessment.app.config import RankingSettings
from assessment.app.registry import get_method_registry, run_method
from models.baselines.src.peerrank import PEERRANK_INPUT_NOTE
from models.core.src.errors import MissingScoresError, PeerAssessmentError
from models.core.src.types import GradeRecord, MethodTag, RankingResult
from models.hodgerank.src.decomposition import InconsistencyMetrics, decompose_residual, inconsistency_metrics
from models.hodgerank.src.graph import build_graph, connected_components
from models.hodgerank.src.solver import solve_hodgerank
from models.synthetic.src.generator import kendall_tau

logger = structlog.get_logger()

TEMPLATES = Path(__file__).parent / "templates"
STEADY_LINE = "steady"
STEADY_LINE_NOTE = (
    "steady line: the diagonal value = quantile, i.e. the sorted curve of "
    "scores spread evenly over [0, 1]"
)
METHOD_COLOURS = {
    MethodTag.HODGERANK: "#1f77b4",
    MethodTag.CUMULATIVE_AVG: "#d62728",
    MethodTag.TRUNCATED_AVG: "#ff7f0e",
    MethodTag.PEERRANK: "#2ca02c",
}

Curve = list[tuple[float, float]]


class NormalizedRanking(BaseModel):
    values: dict[str, float]
    degenerate: bool = Field(False, description="All scores equal; every student mapped to 0.5")


def normalize_unit_interval(ranking: RankingResult | Mapping[str, float]) -> NormalizedRanking:
    """x -> (x - min) / (max - min); equal scores all map to 0.5."""
    if isinstance(ranking, RankingResult):
        if ranking.missing:
            raise MissingScoresError(ranking.missing)
        scores = ranking.scores
    else:
        scores = ranking
    if not scores:
        raise ValueError("cannot normalize an empty ranking")

    values = np.fromiter(scores.values(), dtype=np.float64, count=len(scores))
    low, high = float(values.min()), float(values.max())
    if high == low:
        return NormalizedRanking(values=dict.fromkeys(scores, 0.5), degenerate=True)
    mapped = (values - low) / (high - low)
    return NormalizedRanking(values=dict(zip(scores, mapped.tolist(), strict=True)))


def ranking_curve(normalized: NormalizedRanking | Mapping[str, float]) -> Curve:
    values = normalized.values if isinstance(normalized, NormalizedRanking) else normalized
    ordered = sorted(values.values())
    n = len(ordered)
    if n == 1:
        return [(0.0, ordered[0])]
    return [(k / (n - 1), v) for k, v in enumerate(ordered)]


def steady_line(n: int) -> Curve:
    if n <= 1:
        return [(0.0, 0.0)] if n == 1 else []
    return [(k / (n - 1), k / (n - 1)) for k in range(n)]


def above_steady_fraction(curve: Curve) -> float | None:
    """Share of interior quantiles where the curve lies on or above the diagonal."""
    interior = curve[1:-1]
    if not interior:
        return None
    return sum(1 for u, v in interior if v >= u - 1e-12) / len(interior)


# ── Report model ────────────────────────────────────────────────────────────


class MethodOutcome(BaseModel):
    method: MethodTag
    status: str = Field(description="ok | failed")
    error: str | None = None
    scores: dict[str, float] = Field(default_factory=dict)
    missing: list[str] = Field(default_factory=list)
    flags: dict[str, str] = Field(default_factory=dict)
    warnings: list[str] = Field(default_factory=list)
    converged: bool | None = None
    iterations: int | None = None
    degenerate: bool = False
    curve: Curve = Field(default_factory=list)
    above_steady_fraction: float | None = None
    skewness: float | None = None
    kurtosis: float | None = None
    tau_vs_truth: float | None = None


class ComparisonReport(BaseModel):
    students: int
    records: int
    scale: str
    settings: dict[str, str | float | int | None]
    methods: list[MethodOutcome]
    pairwise_tau: dict[str, dict[str, float | None]] = Field(default_factory=dict)
    inconsistency: InconsistencyMetrics | None = None
    component_count: int = 0
    connectivity_warning: str | None = None
    steady_line: Curve = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)

    def outcome(self, method: MethodTag) -> MethodOutcome:
        return next(m for m in self.methods if m.method == method)


def _shape_statistics(curve: Curve) -> tuple[float | None, float | None]:
    values = np.array([v for _, v in curve])
    if values.size < 3 or np.ptp(values) == 0.0:
        return None, None
    return float(skew(values)), float(kurtosis(values))


def _outcome(result: RankingResult, truth: Mapping[str, float] | None) -> MethodOutcome:
    outcome = MethodOutcome(
        method=result.method_tag,
        status="ok",
        scores=result.scores,
        missing=result.missing,
        flags=result.flags,
        warnings=result.warnings,
        converged=result.converged,
        iterations=result.iterations,
    )
    if result.scores:
        normalized = normalize_unit_interval(result.scores)
        outcome.degenerate = normalized.degenerate
        outcome.curve = ranking_curve(normalized)
        outcome.above_steady_fraction = above_steady_fraction(outcome.curve)
        outcome.skewness, outcome.kurtosis = _shape_statistics(outcome.curve)
    if truth is not None:
        try:
            outcome.tau_vs_truth = kendall_tau(result, truth)
        except ValueError as e:
            logger.warning("tau_vs_truth_undefined", method=result.method_tag.value, error=str(e))
    return outcome


def compare_methods(
    records: Sequence[GradeRecord],
    settings: RankingSettings,
    *,
    truth: Mapping[str, float] | None = None,
) -> ComparisonReport:
    """Run every registered method in a fixed order; a failing method is reported, not fatal."""
    graph = build_graph(records, tie_policy=settings.tie_policy, mode=settings.aggregate)
    labeling = connected_components(graph)

    results: dict[MethodTag, RankingResult] = {}
    outcomes: list[MethodOutcome] = []
    for method in get_method_registry():
        try:
            if method.tag == MethodTag.HODGERANK:
                result = solve_hodgerank(graph, solver=settings.solver, tol=settings.cg_tol)
            else:
                result = run_method(method, records, settings)
        except (PeerAssessmentError, ValueError) as e:
            logger.warning("ranking_method_failed", method=method.name, error=str(e))
            outcomes.append(MethodOutcome(method=method.tag, status="failed", error=str(e)))
            continue
        results[method.tag] = result
        outcomes.append(_outcome(result, truth))

    pairwise: dict[str, dict[str, float | None]] = {tag.value: {} for tag in results}
    for a, b in combinations(results, 2):
        try:
            tau: float | None = kendall_tau(results[a], results[b].scores)
        except ValueError:
            tau = None
        pairwise[a.value][b.value] = tau
        pairwise[b.value][a.value] = tau

    inconsistency = None
    hodgerank = results.get(MethodTag.HODGERANK)
    if hodgerank is not None:
        try:
            inconsistency = inconsistency_metrics(decompose_residual(graph, hodgerank))
        except PeerAssessmentError as e:
            logger.warning("inconsistency_unavailable", error=str(e))

    connectivity_warning = None
    if labeling.count > 1:
        connectivity_warning = (
            f"comparison graph has {labeling.count} connected components; "
            "HodgeRank scores are comparable only within a component"
        )

    report = ComparisonReport(
        students=graph.n,
        records=len(records),
        scale=settings.scale.label(),
        settings={
            "tie_policy": settings.tie_policy.value,
            "aggregate": settings.aggregate.value,
            "trim": settings.trim,
            "alpha": settings.alpha,
            "beta": settings.beta,
            "peerrank_epsilon": settings.peerrank_epsilon,
            "solver": settings.solver.value,
        },
        methods=outcomes,
        pairwise_tau=pairwise,
        inconsistency=inconsistency,
        component_count=labeling.count,
        connectivity_warning=connectivity_warning,
        steady_line=steady_line(graph.n),
        notes=[STEADY_LINE_NOTE, PEERRANK_INPUT_NOTE],
    )
    logger.info(
        "comparison_complete",
        methods=[o.method.value for o in outcomes if o.status == "ok"],
        failed=[o.method.value for o in outcomes if o.status == "failed"],
        components=labeling.count,
    )
    return report


# ── Output ──────────────────────────────────────────────────────────────────


def curves_frame(report: ComparisonReport) -> pd.DataFrame:
    """Tidy (method, quantile, value) rows; the steady line is included as method 'steady'."""
    rows = [
        (outcome.method.value, u, v)
        for outcome in report.methods
        for u, v in outcome.curve
    ]
    rows.extend((STEADY_LINE, u, v) for u, v in report.steady_line)
    return pd.DataFrame(rows, columns=["method", "quantile", "value"])


def render_svg(report: ComparisonReport, *, width: int = 720, height: int = 480) -> str:
    left, right, top, bottom = 64, 170, 36, 56
    plot_w, plot_h = width - left - right, height - top - bottom

    def points(curve: Curve) -> str:
        return " ".join(f"{left + u * plot_w:.2f},{top + (1.0 - v) * plot_h:.2f}" for u, v in curve)

    series = [
        {
            "label": outcome.method.value,
            "colour": METHOD_COLOURS[outcome.method],
            "points": points(outcome.curve),
        }
        for outcome in report.methods
        if outcome.curve
    ]
    ticks = [
        {"value": f"{t:.1f}", "x": f"{left + t * plot_w:.2f}", "y": f"{top + (1.0 - t) * plot_h:.2f}"}
        for t in np.linspace(0.0, 1.0, 6)
    ]
    env = Environment(
        loader=FileSystemLoader(TEMPLATES),
        autoescape=select_autoescape(["svg", "j2"]),
        keep_trailing_newline=True,
    )
    return env.get_template("curves.svg.j2").render(
        width=width,
        height=height,
        left=left,
        top=top,
        plot_w=plot_w,
        plot_h=plot_h,
        series=series,
        steady=points(report.steady_line or [(0.0, 0.0), (1.0, 1.0)]),
        ticks=ticks,
        students=report.students,
    )


def write_report(report: ComparisonReport, out_dir: Path) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out_dir / "report.json",
        "curves": out_dir / "curves.csv",
        "plot": out_dir / "curves.svg",
    }
    paths["report"].write_bytes(orjson.dumps(report.model_dump(mode="json"), option=orjson.OPT_INDENT_2))
    curves_frame(report).to_csv(paths["curves"], index=False, lineterminator="\n")
    paths["plot"].write_text(render_svg(report), encoding="utf-8")
    logger.info("report_written", out_dir=str(out_dir), files=[p.name for p in paths.values()])
    return paths
