"""
HodgeRank — least-squares global ranking from peer score differences

Turns raw peer grades into a pairwise comparison graph, solves for the
minimum-norm potential whose differences best explain the observed score
differences, and splits what it cannot explain into local (triangle curl)
and global (harmonic) inconsistency.

Architecture:
  1. graph: within-grader score differences per assignment -> Y^α, W^α;
     weighted aggregation -> ComparisonGraph; union-find connectivity
  2. solver: sparse graph Laplacian, divergence, projected conjugate gradient
     per connected component (dense eigendecomposition fallback, n <= 200)
  3. decomposition: residual = curl part + harmonic part, triangle curls,
     inconsistency ratios
"""
