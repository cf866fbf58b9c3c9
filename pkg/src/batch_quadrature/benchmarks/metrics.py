"""Benchmark metrics against analytic ground truth."""

import logging
from collections.abc import Callable, Sequence

import numpy as np
from scipy.integrate import trapezoid

from batch_quadrature.benchmarks.problems import ENVELOPE_HALF_WIDTH, SyntheticProblem
from batch_quadrature.exceptions import (
    DegenerateSliceError,
    EvidenceNotReadyError,
    GroundTruthUnavailableError,
)
from batch_quadrature.models import EvidenceEstimate, Metrics, PosteriorModel, RunSummary, TraceRecord
from batch_quadrature.services.analytic_quadrature import (
    build_posterior,
    posterior_conditional,
    posterior_joint_density,
)
from batch_quadrature.state import EngineState

logger = logging.getLogger(__name__)

KL_EPSILON = 1e-300
DEFAULT_POSTERIOR_SAMPLES = 10_000
CONDITIONAL_GRID_POINTS = 50

Density = Callable[[np.ndarray], float | np.ndarray]


def absolute_error(problem: SyntheticProblem, evidence_mean: float) -> float:
    """|E[Z|y] − Z_true|.

    Raises:
        GroundTruthUnavailableError: If Z_true is unknown.
    """
    if problem.z_true is None:
        raise GroundTruthUnavailableError.for_metric(problem.name, "mae")
    return abs(evidence_mean - problem.z_true)


def kl_divergence(true_density: Density, est_density: Density, samples: np.ndarray) -> float:
    """Monte-Carlo KL(p_true ‖ p_est) over draws from p_true.

    The estimated density is floored at `KL_EPSILON`.
    """
    p_true = np.asarray(true_density(samples), dtype=float)
    p_est = np.maximum(np.asarray(est_density(samples), dtype=float), KL_EPSILON)
    return float(np.mean(np.log(p_true) - np.log(p_est)))


def _normalised(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    mass = trapezoid(values, grid)
    return values / mass if mass > 0 else values


def conditional_rmse(
    problem: SyntheticProblem,
    post: PosteriorModel,
    anchor: np.ndarray,
    grid_points: int = CONDITIONAL_GRID_POINTS,
) -> float:
    """RMSE between true and estimated conditionals through `anchor`.

    Every coordinate in turn is freed and both conditionals are evaluated on
    a grid over [-6, 6], each normalised by the trapezoid rule on that grid.
    Slices that carry no estimated mass are skipped.
    """
    grid = np.linspace(-ENVELOPE_HALF_WIDTH, ENVELOPE_HALF_WIDTH, grid_points)
    errors: list[np.ndarray] = []
    for free in range(problem.dim):
        points = np.repeat(anchor[None, :], grid_points, axis=0)
        points[:, free] = grid
        truth = _normalised(np.asarray(problem.posterior_density(points)), grid)
        fixed = [d for d in range(problem.dim) if d != free]
        if fixed:
            try:
                conditional = posterior_conditional(post, fixed, anchor[fixed].tolist())
            except DegenerateSliceError as e:
                logger.debug(e.message)
                continue
            estimate = np.asarray(conditional(grid))
        else:
            estimate = np.asarray(posterior_joint_density(post, points))
        errors.append(truth - _normalised(estimate, grid))
    if not errors:
        return float("nan")
    return float(np.sqrt(np.mean(np.concatenate(errors) ** 2)))


def compute_metrics(
    problem: SyntheticProblem,
    post: PosteriorModel | None,
    estimate: EvidenceEstimate,
    samples: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    n_samples: int = DEFAULT_POSTERIOR_SAMPLES,
) -> Metrics:
    """MAE of the evidence, posterior KL and conditional RMSE.

    Metrics without ground truth, or without a usable posterior, are None.

    Args:
        problem: The benchmark problem.
        post: Final posterior; None if E[Z|y] ≤ 0.
        estimate: Final evidence estimate.
        samples: True-posterior draws; drawn with `rng` when None.
        rng: Generator for the true-posterior draws.
        n_samples: Number of draws when sampling here.
    """
    if not problem.has_ground_truth:
        logger.info(f"Ground truth for {problem.name} unavailable; metrics skipped")
        return Metrics()
    mae = absolute_error(problem, estimate.mean)
    if post is None:
        return Metrics(mae=mae)
    if samples is None:
        samples = problem.sample_posterior(n_samples, np.random.default_rng(rng))
    kl = kl_divergence(
        problem.posterior_density, lambda x: posterior_joint_density(post, x), samples
    )
    anchor = samples[int(np.argmax(problem.posterior_density(samples)))]
    return Metrics(mae=mae, kl=kl, conditional_rmse=conditional_rmse(problem, post, anchor))


def metrics_hook(
    problem: SyntheticProblem,
    rng: np.random.Generator | int | None = None,
    n_samples: int = DEFAULT_POSTERIOR_SAMPLES,
) -> Callable[[EngineState], Metrics | None]:
    """Per-step MAE and KL for the engine trace.

    True-posterior draws are taken once, up front, from a generator separate
    from the engine's.
    """
    if not problem.has_ground_truth:
        return lambda _state: None
    samples = problem.sample_posterior(n_samples, np.random.default_rng(rng))

    def hook(state: EngineState) -> Metrics:
        mae = absolute_error(problem, state.estimate.mean)
        try:
            post = build_posterior(state.model, state.prior)
        except EvidenceNotReadyError:
            return Metrics(mae=mae)
        kl = kl_divergence(
            problem.posterior_density, lambda x: posterior_joint_density(post, x), samples
        )
        return Metrics(mae=mae, kl=kl)

    return hook


def _median_iqr(values: Sequence[float | None]) -> tuple[float | None, float | None]:
    present = np.array([v for v in values if v is not None and np.isfinite(v)], dtype=float)
    if present.size == 0:
        return None, None
    q1, median, q3 = np.percentile(present, [25, 50, 75])
    return float(median), float(q3 - q1)


def summarise_runs(
    problem: SyntheticProblem,
    seeds: Sequence[int],
    estimates: Sequence[EvidenceEstimate],
    metrics: Sequence[Metrics],
    baseline_traces: Sequence[list[TraceRecord]] = (),
) -> RunSummary:
    """Median and interquartile range of the final metrics over repeats."""
    final_mae = [m.mae for m in metrics]
    final_kl = [m.kl for m in metrics]
    median_mae, iqr_mae = _median_iqr(final_mae)
    median_kl, iqr_kl = _median_iqr(final_kl)
    baseline_mae, _ = _median_iqr([trace[-1].mae for trace in baseline_traces if trace])
    return RunSummary(
        problem=problem.name,
        dim=problem.dim,
        seeds=list(seeds),
        final_evidence=[e.mean for e in estimates],
        final_mae=final_mae,
        final_kl=final_kl,
        median_mae=median_mae,
        iqr_mae=iqr_mae,
        median_kl=median_kl,
        iqr_kl=iqr_kl,
        z_true=problem.z_true,
        baseline_mae=baseline_mae,
    )
