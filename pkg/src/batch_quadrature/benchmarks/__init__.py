"""Synthetic benchmark problems, metrics and the Monte-Carlo baseline."""

from batch_quadrature.benchmarks.baseline import mc_baseline_estimate
from batch_quadrature.benchmarks.metrics import (
    compute_metrics,
    kl_divergence,
    metrics_hook,
    summarise_runs,
)
from batch_quadrature.benchmarks.problems import (
    SyntheticProblem,
    eval_synthetic_likelihood,
    get_problem,
    list_problems,
)

__all__ = [
    "SyntheticProblem",
    "compute_metrics",
    "eval_synthetic_likelihood",
    "get_problem",
    "kl_divergence",
    "list_problems",
    "mc_baseline_estimate",
    "metrics_hook",
    "summarise_runs",
]
