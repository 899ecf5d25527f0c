"""
Exception hierarchy for the peer assessment engines.

Row-level ingestion problems never raise; they are reported in IngestReport.
"""

from __future__ import annotations


class PeerAssessmentError(Exception):
    """Base class for every error raised by the ranking engines."""


class RecordValidationError(PeerAssessmentError, ValueError):
    """The input as a whole is unusable (unreadable, no header, no valid records, bad config)."""


class UnknownAssignmentError(RecordValidationError):
    def __init__(self, assignments: list[str]):
        self.assignments = assignments
        super().__init__(f"unknown assignment(s) in ordering: {', '.join(assignments)}")


class MissingScoresError(PeerAssessmentError, ValueError):
    def __init__(self, students: list[str]):
        self.students = students
        super().__init__(f"missing scores for: {', '.join(students)}")


class SolverError(PeerAssessmentError):
    """An iterative solve stopped above its tolerance."""

    def __init__(self, message: str, *, achieved_residual: float, iterations: int):
        self.achieved_residual = achieved_residual
        self.iterations = iterations
        super().__init__(f"{message} (residual {achieved_residual:.3e} after {iterations} iterations)")


class NoComparisonSignalError(PeerAssessmentError):
    def __init__(self) -> None:
        super().__init__("no comparison signal")


class DegenerateGraderMassError(PeerAssessmentError):
    def __init__(self, student: str, iteration: int):
        self.student = student
        self.iteration = iteration
        super().__init__(
            f"degenerate grader mass: graders of {student!r} have total score 0 at iteration {iteration}"
        )
