"""
Baseline Ranking Methods — what instructors finalize peer grades with today

  - Cumulative average: mean of every score a student received
  - Truncated average: drop the `trim` lowest and highest received scores, then average
  - PeerRank: fixed-point iteration in which a grade counts in proportion to
    the grader's own current score, optionally rewarding graders whose grades
    agree with the consensus (beta term)

Architecture:
  - Input: validated GradeRecord lists
  - Averages: exact (fsum) per-student sums, invariant under record order
  - PeerRank: dense numpy iteration over the grader x gradee matrix of
    per-pair mean normalized grades
  - Output: RankingResult with missing students and per-student flags
"""
