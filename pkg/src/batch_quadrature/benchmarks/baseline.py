"""Vanilla Monte-Carlo evidence estimate used as the convergence baseline."""

import numpy as np

from batch_quadrature.benchmarks.problems import SyntheticProblem
from batch_quadrature.models import TraceRecord


def mc_baseline_estimate(
    problem: SyntheticProblem, eval_budget: int, rng: np.random.Generator | int | None = None
) -> list[TraceRecord]:
    """Running mean of ℓ(x_i) over prior draws x_i ∼ π.

    Args:
        problem: The benchmark problem.
        eval_budget: Number of likelihood evaluations.
        rng: Generator or seed.

    Returns:
        One record per sample. The variance column is the running sample
        variance divided by the sample count.

    Raises:
        ValueError: If `eval_budget` < 1.
    """
    if eval_budget < 1:
        raise ValueError(f"eval_budget must be >= 1, got {eval_budget}")
    rng = np.random.default_rng(rng)
    prior = problem.prior
    draws = prior.mean + prior.std_diag * rng.standard_normal((eval_budget, problem.dim))
    values = problem.formula(draws)

    counts = np.arange(1, eval_budget + 1)
    running_mean = np.cumsum(values) / counts
    running_square = np.cumsum(values**2) / counts
    with np.errstate(invalid="ignore", divide="ignore"):
        sample_var = np.where(
            counts > 1, (running_square - running_mean**2) * counts / (counts - 1), 0.0
        )
    estimator_var = np.maximum(sample_var, 0.0) / counts

    return [
        TraceRecord(
            iteration=int(k),
            evaluations=int(k),
            overhead_ms=0.0,
            evidence_mean=float(mean),
            evidence_variance=float(var),
            mae=None if problem.z_true is None else abs(float(mean) - problem.z_true),
        )
        for k, mean, var in zip(counts, running_mean, estimator_var, strict=True)
    ]
