"""
Peer Assessment Ranking — application layer

Serves:
  1. Ingestion of grade-record files (CSV / JSON) with per-row rejection reasons
  2. Settings from defaults, RANK_* environment, config files and flags
  3. Method registry and the `peer-rank` command line
  4. Comparison reports: JSON, tidy curve CSV and an SVG plot
"""
