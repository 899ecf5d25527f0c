"""
Synthetic Peer-Assessment Cohorts — seeded ground truth for validating rankings

Course shape defaults: 133 students, 13 assignments, 5 reviews per student per assignment.

Each student has a true quality, an additive grader bias and a grader noise level.
A grade is clamp(quality(gradee) + bias(grader) + Normal(0, noise_sd(grader))).
This additive model is an assumption made for testing, not an empirical one.

Architecture:
  - CohortConfig: file-loadable parameters with distribution spec strings
  - build_cohort: draws quality, bias and noise from a Philox stream keyed by the seed
  - generate: draws peers and noise from the jumped Philox stream,
    assignment-major then grader-minor
  - kendall_tau: tau-b between a ranking and ground truth (scipy.stats)
"""
