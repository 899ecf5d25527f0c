"""
peer-rank — command-line front end for peer-assessment ranking

Commands:
  1. rank:          scores of one method, sorted descending, with component labels
  2. components:    connected-component count after each assignment prefix
  3. simulate:      synthetic cohort records, optionally a full method comparison
  4. inconsistency: curl/harmonic share of the HodgeRank residual and the worst triangles
  5. compare:       every method on a record file, report + curves + plot

Exit codes: 0 ok, 2 invalid input or config, 3 solver failure, 4 no comparison signal.
Results go to standard output (or --output); diagnostics and logs to standard error.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

import orjson
import pandas as pd
import structlog

from assessment.app.config import RankingSettings, load_cohort_config, load_settings, read_config_file
from assessment.app.ingest import RecordFormat, read_records, records_to_csv
from assessment.app.log_config import configure_logging
from assessment.app.registry import get_method_by_name, get_method_registry, run_method
from assessment.app.report import compare_methods, write_report
from models.core.src.errors import (
    DegenerateGraderMassError,
    NoComparisonSignalError,
    PeerAssessmentError,
    RecordValidationError,
    SolverError,
)
from models.core.src.types import AggregateMode, GradeRecord, RankingResult, TiePolicy
from models.hodgerank.src.decomposition import decompose_residual, inconsistency_metrics, top_triangles
from models.hodgerank.src.graph import build_graph, component_trajectory
from models.hodgerank.src.solver import SolverKind, solve_hodgerank
from models.synthetic.src.generator import build_cohort, generate, read_truth, write_truth

logger = structlog.get_logger()

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_NO_SIGNAL = 4

SETTING_FLAGS = (
    "log_level",
    "scale_min",
    "scale_max",
    "tie_policy",
    "aggregate",
    "trim",
    "alpha",
    "beta",
    "peerrank_epsilon",
    "solver",
    "seed",
    "top",
)


# ── Helpers ─────────────────────────────────────────────────────────────────


def _emit(payload: bytes, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(payload.decode("utf-8"))
    else:
        output.write_bytes(payload)


def _load_records(args: argparse.Namespace, settings: RankingSettings) -> list[GradeRecord]:
    fmt = RecordFormat(args.input_format) if args.input_format else None
    records, report = read_records(args.input, fmt, scale=settings.scale)
    for rejection in report.rejection_reasons:
        print(f"{args.input}:{rejection.line}: rejected: {rejection.reason}", file=sys.stderr)
    if not records:
        raise RecordValidationError(f"no valid records in {args.input}")
    return records


def ranking_frame(result: RankingResult) -> pd.DataFrame:
    rows = result.ranked()
    return pd.DataFrame(
        {
            "rank": [row.rank for row in rows],
            "student": [row.student for row in rows],
            "score": [row.score for row in rows],
            "component": pd.array([row.component for row in rows], dtype="Int64"),
        },
        columns=["rank", "student", "score", "component"],
    )


def _report_warnings(result: RankingResult) -> None:
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for student, flag in sorted(result.flags.items()):
        print(f"note: {student}: {flag}", file=sys.stderr)


# ── Commands ────────────────────────────────────────────────────────────────


def cmd_rank(args: argparse.Namespace, settings: RankingSettings) -> int:
    method = get_method_by_name(args.method)
    if method is None:
        raise RecordValidationError(f"unknown method {args.method!r}")
    records = _load_records(args, settings)
    result = run_method(method, records, settings)
    _report_warnings(result)

    if args.format == "json":
        payload = {
            "method": result.method_tag.value,
            "scores": [row.model_dump(mode="json") for row in result.ranked()],
            "warnings": result.warnings,
            "missing": result.missing,
            "flags": result.flags,
        }
        _emit(orjson.dumps(payload, option=orjson.OPT_INDENT_2) + b"\n", args.output)
    else:
        _emit(ranking_frame(result).to_csv(index=False, lineterminator="\n").encode("utf-8"), args.output)
    return EXIT_OK


def cmd_components(args: argparse.Namespace, settings: RankingSettings) -> int:
    records = _load_records(args, settings)
    if args.order:
        ordering = [a.strip() for a in args.order.split(",") if a.strip()]
    else:
        ordering = sorted({r.assignment for r in records})
    counts = component_trajectory(records, ordering, tie_policy=settings.tie_policy)
    lines = "".join(f"{t}: {count}\n" for t, count in enumerate(counts, start=1))
    _emit(lines.encode("utf-8"), args.output)
    return EXIT_OK


def cmd_inconsistency(args: argparse.Namespace, settings: RankingSettings) -> int:
    records = _load_records(args, settings)
    graph = build_graph(records, tie_policy=settings.tie_policy, mode=settings.aggregate)
    if graph.m == 0:
        raise RecordValidationError("comparison graph has no edges")
    ranking = solve_hodgerank(graph, solver=settings.solver, tol=settings.cg_tol)
    decomposition = decompose_residual(graph, ranking)
    metrics = inconsistency_metrics(decomposition)
    worst = top_triangles(decomposition.curl_flow, graph, settings.top)

    lines = [
        f"global_ratio: {metrics.global_ratio!r}",
        f"curl_ratio: {metrics.curl_ratio!r}",
        f"harmonic_ratio: {metrics.harmonic_ratio!r}",
        f"gradient_ratio: {metrics.gradient_ratio!r}",
        f"triangles: {decomposition.triangle_count}",
    ]
    if worst:
        lines.append(f"top {len(worst)} triangles by |curl|:")
        lines.extend(f"{' '.join(t.triangle)} {t.curl_value!r}" for t in worst)
    _emit(("\n".join(lines) + "\n").encode("utf-8"), args.output)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, settings: RankingSettings) -> int:
    records = _load_records(args, settings)
    truth = read_truth(args.truth) if args.truth else None
    report = compare_methods(records, settings, truth=truth)
    paths = write_report(report, args.out_dir)
    for outcome in report.methods:
        if outcome.status != "ok":
            print(f"warning: {outcome.method.value} failed: {outcome.error}", file=sys.stderr)
    if report.connectivity_warning:
        print(f"warning: {report.connectivity_warning}", file=sys.stderr)
    print("\n".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, settings: RankingSettings) -> int:
    cohort_path = args.cohort_config
    if cohort_path is None and args.config is not None and "cohort" in read_config_file(args.config):
        cohort_path = args.config

    bias = args.bias
    if bias is None and args.bias_sd is not None:
        bias = "none" if args.bias_sd == 0 else f"normal:{args.bias_sd}"
    scale = None
    if args.scale_min is not None or args.scale_max is not None:
        scale = settings.scale
    config = load_cohort_config(
        cohort_path,
        defaults={"seed": settings.seed},
        n_students=args.students,
        n_assignments=args.assignments,
        reviews_per_student=args.reviews,
        seed=args.seed,
        quality=args.quality,
        bias=bias,
        noise_sd=args.noise_sd,
        scale=scale,
    )
    cohort = build_cohort(config)
    records = generate(cohort)
    _emit(records_to_csv(records), args.output)

    if args.compare:
        cohort_settings = settings.model_copy(
            update={"scale_min": cohort.scale.low, "scale_max": cohort.scale.high}
        )
        report = compare_methods(records, cohort_settings, truth=cohort.true_quality)
        paths = write_report(report, args.out_dir)
        write_truth(cohort, args.out_dir / "truth.csv")
        for outcome in report.methods:
            tau = "n/a" if outcome.tau_vs_truth is None else f"{outcome.tau_vs_truth:.4f}"
            print(f"{outcome.method.value}: tau vs truth {tau}", file=sys.stderr)
        print(f"report written to {paths['report'].parent}", file=sys.stderr)
    return EXIT_OK


# ── Parser ──────────────────────────────────────────────────────────────────


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Settings file (.json, .toml, .yaml)")
    common.add_argument("--log-level", choices=["error", "warn", "info", "debug"], help="Overrides RANK_LOG")
    common.add_argument("--scale-min", type=float, help="Lowest valid score (default 0)")
    common.add_argument("--scale-max", type=float, help="Highest valid score (default 100)")
    common.add_argument("--input-format", choices=[f.value for f in RecordFormat])
    common.add_argument("--output", "-o", type=Path, help="Write results here instead of stdout")
    common.add_argument("--tie-policy", choices=[t.value for t in TiePolicy])
    common.add_argument("--aggregate", choices=[a.value for a in AggregateMode])
    common.add_argument("--solver", choices=[s.value for s in SolverKind])
    common.add_argument("--trim", type=int, help="Scores dropped per side by the truncated average")
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument(
        "--peerrank-epsilon",
        type=float,
        nargs="?",
        const=1e-9,
        help="Regularize the PeerRank denominator (default epsilon 1e-9 when given without a value)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="peer-rank", description="Rank students from peer grades with HodgeRank and baselines"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    rank = commands.add_parser("rank", parents=[common], help="Score students with one method")
    rank.add_argument("input", type=Path)
    rank.add_argument(
        "--method",
        default="hodgerank",
        choices=[m.name for m in get_method_registry()],
    )
    rank.add_argument("--format", choices=["csv", "json"], default="csv", help="Output format")
    rank.set_defaults(handler=cmd_rank)

    components = commands.add_parser("components", parents=[common], help="Component counts per assignment prefix")
    components.add_argument("input", type=Path)
    components.add_argument("--order", help="Comma-separated assignment ids (default: sorted ids)")
    components.set_defaults(handler=cmd_components)

    inconsistency = commands.add_parser("inconsistency", parents=[common], help="Hodge decomposition of the residual")
    inconsistency.add_argument("input", type=Path)
    inconsistency.add_argument("--top", type=int, help="Triangles to list (default 10)")
    inconsistency.set_defaults(handler=cmd_inconsistency)

    compare = commands.add_parser("compare", parents=[common], help="Compare every method on a record file")
    compare.add_argument("input", type=Path)
    compare.add_argument("--truth", type=Path, help="CSV with columns student,true_quality")
    compare.add_argument("--out-dir", type=Path, default=Path("report"))
    compare.set_defaults(handler=cmd_compare)

    simulate = commands.add_parser("simulate", parents=[common], help="Generate a synthetic cohort")
    simulate.add_argument("cohort_config", type=Path, nargs="?", help="Cohort file (.json, .toml, .yaml)")
    simulate.add_argument("--students", type=int)
    simulate.add_argument("--assignments", type=int)
    simulate.add_argument("--reviews", type=int, help="Peers each student grades per assignment")
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--quality", help="uniform:lo,hi | normal:mean,sd | beta:a,b")
    simulate.add_argument("--bias", help="none | constant:v | uniform:half_width | normal:sd")
    simulate.add_argument("--bias-sd", type=float, help="Shorthand for --bias normal:SD (0 means none)")
    simulate.add_argument("--noise-sd", type=float)
    simulate.add_argument("--compare", action="store_true", help="Also compare every method against the truth")
    simulate.add_argument("--out-dir", type=Path, default=Path("report"))
    simulate.set_defaults(handler=cmd_simulate)
    return parser


# ── Entry point ─────────────────────────────────────────────────────────────


def _settings_from_args(args: argparse.Namespace) -> RankingSettings:
    overrides = {name: getattr(args, name, None) for name in SETTING_FLAGS}
    overrides["log"] = overrides.pop("log_level")
    return load_settings(args.config, **overrides)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        settings = _settings_from_args(args)
    except RecordValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    configure_logging(settings.log)

    handler: Callable[[argparse.Namespace, RankingSettings], int] = args.handler
    try:
        return handler(args, settings)
    except NoComparisonSignalError as e:
        logger.error("command_failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_SIGNAL
    except (SolverError, DegenerateGraderMassError) as e:
        logger.error("command_failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (PeerAssessmentError, ValueError) as e:
        logger.error("command_failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
