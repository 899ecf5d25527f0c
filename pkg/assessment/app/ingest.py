"""
Grade-record ingestion — CSV and JSON files into validated GradeRecords.

CSV: header `assignment_id,grader_id,gradee_id,score`, LF or CRLF line ends.
JSON: an array of objects with the same four keys.

Bad rows never abort a parse; each becomes a Rejection with its line number
(the object's 1-based position for JSON). A repeated (assignment, grader,
gradee) triple keeps its last occurrence; earlier ones are rejected.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from enum import Enum
from pathlib import Path
from typing import Any, BinaryIO

import orjson
import pandas as pd
import structlog
from pydantic import BaseModel, Field, ValidationError, model_validator

from models.core.src.errors import RecordValidationError
from models.core.src.types import GradeRecord, ScoreScale

logger = structlog.get_logger()

CSV_COLUMNS = ("assignment_id", "grader_id", "gradee_id", "score")


class RecordFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class Rejection(BaseModel):
    line: int = Field(ge=1)
    reason: str


class IngestReport(BaseModel):
    accepted: int = Field(0, ge=0)
    rejected: int = Field(0, ge=0)
    total: int = Field(0, ge=0, description="Input rows seen (blank CSV lines excluded)")
    rejection_reasons: list[Rejection] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_counts(self) -> IngestReport:
        if self.accepted + self.rejected != self.total:
            raise ValueError("accepted + rejected must equal the number of input rows")
        if len(self.rejection_reasons) != self.rejected:
            raise ValueError("every rejected row needs a reason")
        return self


# ── Row validation ──────────────────────────────────────────────────────────


def _check_row(
    assignment: Any, grader: Any, gradee: Any, score: Any, scale: ScoreScale
) -> GradeRecord | str:
    """A record, or the reason the row is rejected."""
    ids = []
    for value in (assignment, grader, gradee):
        if isinstance(value, bool) or not isinstance(value, (str, int)):
            return "missing field"
        text = str(value).strip()
        if not text:
            return "missing field"
        ids.append(text)
    if score is None or (isinstance(score, str) and not score.strip()):
        return "missing field"
    if ids[1] == ids[2]:
        return "self-grade"

    if isinstance(score, bool):
        return "non-numeric score"
    try:
        value = float(score)
    except (TypeError, ValueError):
        return "non-numeric score"
    if not math.isfinite(value):
        return "non-numeric score"
    if not scale.contains(value):
        return f"score out of range {scale.label()}"

    try:
        return GradeRecord(assignment=ids[0], grader=ids[1], gradee=ids[2], score=value)
    except ValidationError as e:
        return e.errors()[0]["msg"]


def _csv_rows(text: str) -> list[tuple[int, tuple[Any, ...] | None]]:
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        return []
    names = [h.strip() for h in header]
    if any(col not in names for col in CSV_COLUMNS):
        raise RecordValidationError(f"missing CSV header: expected {','.join(CSV_COLUMNS)}")
    positions = [names.index(col) for col in CSV_COLUMNS]

    rows: list[tuple[int, tuple[Any, ...] | None]] = []
    for fields in reader:
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) < len(names):
            rows.append((reader.line_num, None))
            continue
        rows.append((reader.line_num, tuple(fields[p] for p in positions)))
    return rows


def _json_rows(raw: bytes) -> list[tuple[int, tuple[Any, ...] | None]]:
    try:
        data = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise RecordValidationError(f"unreadable JSON: {e}") from e
    if not isinstance(data, list):
        raise RecordValidationError("JSON input must be an array of objects")
    rows: list[tuple[int, tuple[Any, ...] | None]] = []
    for position, item in enumerate(data, start=1):
        if not isinstance(item, dict) or any(col not in item for col in CSV_COLUMNS):
            rows.append((position, None))
            continue
        rows.append((position, tuple(item[col] for col in CSV_COLUMNS)))
    return rows


# ── Public API ──────────────────────────────────────────────────────────────


def parse_records(
    source: bytes | BinaryIO,
    format: RecordFormat = RecordFormat.CSV,
    *,
    scale: ScoreScale | None = None,
) -> tuple[list[GradeRecord], IngestReport]:
    scale = scale or ScoreScale()
    try:
        raw = source if isinstance(source, bytes) else source.read()
    except OSError as e:
        logger.error("ingest_stream_unreadable", error=str(e))
        raise RecordValidationError(f"unreadable stream: {e}") from e

    if format == RecordFormat.JSON:
        rows = _json_rows(raw) if raw.strip() else []
    else:
        try:
            text = raw.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            logger.error("ingest_not_utf8", error=str(e))
            raise RecordValidationError(f"input is not UTF-8: {e}") from e
        rows = _csv_rows(text)

    candidates: list[tuple[int, GradeRecord]] = []
    rejections: list[Rejection] = []
    latest: dict[tuple[str, str, str], int] = {}
    for line, fields in rows:
        outcome = "missing field" if fields is None else _check_row(*fields, scale)
        if isinstance(outcome, str):
            rejections.append(Rejection(line=line, reason=outcome))
            continue
        key = (outcome.assignment, outcome.grader, outcome.gradee)
        if key in latest:
            rejections.append(Rejection(line=latest[key], reason=f"duplicate: superseded by line {line}"))
        latest[key] = line
        candidates.append((line, outcome))

    records = [
        record
        for line, record in candidates
        if latest[(record.assignment, record.grader, record.gradee)] == line
    ]
    rejections.sort(key=lambda r: r.line)
    report = IngestReport(
        accepted=len(records), rejected=len(rejections), total=len(rows), rejection_reasons=rejections
    )
    logger.info(
        "records_parsed", format=format.value, accepted=report.accepted, rejected=report.rejected
    )
    return records, report


def read_records(
    path: Path,
    format: RecordFormat | None = None,
    *,
    scale: ScoreScale | None = None,
) -> tuple[list[GradeRecord], IngestReport]:
    """Parse a record file; the format follows the extension (.json, else CSV) unless given."""
    if format is None:
        format = RecordFormat.JSON if path.suffix.lower() == ".json" else RecordFormat.CSV
    try:
        with path.open("rb") as handle:
            return parse_records(handle, format, scale=scale)
    except OSError as e:
        logger.error("record_file_unreadable", path=str(path), error=str(e))
        raise RecordValidationError(f"cannot read {path}: {e}") from e


def records_output_frame(records: Sequence[GradeRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "assignment_id": [r.assignment for r in records],
            "grader_id": [r.grader for r in records],
            "gradee_id": [r.gradee for r in records],
            "score": [r.score for r in records],
        },
        columns=list(CSV_COLUMNS),
    )


def records_to_csv(records: Sequence[GradeRecord]) -> bytes:
    """CSV in the ingest schema; floats use the shortest repr that parses back exactly."""
    return records_output_frame(records).to_csv(index=False, lineterminator="\n").encode("utf-8")
