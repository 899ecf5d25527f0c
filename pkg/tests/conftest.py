from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest
import structlog

from models.core.src.types import ComparisonGraph, GradeRecord
from tests.oracles import CYCLE_FLOW, records

CYCLE_ROWS = [
    ("a1", "s1", "s2", 80.0),
    ("a1", "s1", "s3", 79.0),
    ("a1", "s2", "s1", 80.0),
    ("a1", "s2", "s3", 79.0),
    ("a1", "s3", "s1", 80.0),
    ("a1", "s3", "s2", 81.0),
]


@pytest.fixture(autouse=True)
def _quiet_logs():
    structlog.reset_defaults()
    structlog.configure(wrapper_class=structlog.make_filtering_bound_logger(40))
    yield
    structlog.reset_defaults()


@pytest.fixture
def cycle_records() -> list[GradeRecord]:
    """Three students, one assignment; within-grader differences give Y12=1, Y13=-1, Y23=-1."""
    return records(CYCLE_ROWS)


@pytest.fixture
def cycle_graph() -> ComparisonGraph:
    ones = 1.0 - np.eye(3)
    return ComparisonGraph.from_matrices(CYCLE_FLOW, ones, vertices=("s1", "s2", "s3"))


@pytest.fixture
def write_csv(tmp_path: Path) -> Callable[[str, list[tuple[str, str, str, float]]], Path]:
    def _write(name: str, rows: list[tuple[str, str, str, float]]) -> Path:
        lines = ["assignment_id,grader_id,gradee_id,score"]
        lines.extend(f"{a},{g},{e},{s:g}" for a, g, e, s in rows)
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write
