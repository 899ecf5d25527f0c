"""
Peer Assessment Core — shared domain types

Defines the data every ranking engine exchanges:
  - GradeRecord: one grading event (assignment, grader, gradee, score)
  - EdgeFlow / WeightMatrix: skew-symmetric pairwise flows and symmetric weights
  - ComparisonGraph: students, aggregated flow and weights, edges with positive weight
  - RankingResult: per-student scores plus component labels and inconsistency norms

Architecture:
  - Record-facing types are frozen Pydantic models (validated at construction)
  - Numeric containers are frozen dataclasses over numpy arrays, one stored
    orientation per pair (i < j), negated on read
"""
