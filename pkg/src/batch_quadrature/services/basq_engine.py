"""Batch Bayesian quadrature loop.

Each step subsamples candidates from the current proposal, builds Nyström
test functions from the current warped posterior covariance, recombines the
candidates down to one batch, evaluates the likelihood on the whole batch
concurrently, then refits the model and re-estimates the evidence.
"""

import logging
import time
from collections.abc import Callable
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from batch_quadrature.exceptions import EvidenceNotReadyError, QuadratureError
from batch_quadrature.models import (
    Checkpoint,
    DiagGaussian,
    EngineConfig,
    EvidenceEstimate,
    GaussianMixture,
    Metrics,
    PosteriorModel,
    ProposalKind,
    RbfKernelParams,
    TraceRecord,
    WarpedGpModel,
)
from batch_quadrature.services import nystrom_basis
from batch_quadrature.services.analytic_quadrature import build_posterior, evidence
from batch_quadrature.services.batch_evaluation import evaluate_batch
from batch_quadrature.services.gaussian_algebra import mixture_sample
from batch_quadrature.services.proposal_samplers import af_mixture_build, propose
from batch_quadrature.services.recombination import recombine
from batch_quadrature.services.warped_gp import (
    DUPLICATE_TOLERANCE,
    PosteriorCovariance,
    fit,
    on_lengthscale_bound,
    optimize_hypers,
    refit,
)
from batch_quadrature.state import (
    EngineState,
    EvaluationCounter,
    KernelFactory,
    Likelihood,
    restore_rng,
    save_checkpoint,
)

logger = logging.getLogger(__name__)

DEFAULT_INITIAL_POINTS = 2
TOP_UP_RETRIES = 10

MetricsHook = Callable[[EngineState], Metrics | None]


def _record(state: EngineState, overhead_seconds: float) -> TraceRecord:
    metrics = state.metrics_hook(state) if state.metrics_hook is not None else None
    return TraceRecord(
        iteration=state.iteration,
        evaluations=state.evaluations,
        overhead_ms=max(overhead_seconds, 0.0) * 1000.0,
        evidence_mean=state.estimate.mean,
        evidence_variance=state.estimate.variance,
        mae=None if metrics is None else metrics.mae,
        kl=None if metrics is None else metrics.kl,
    )


async def init(
    prior: DiagGaussian,
    likelihood: Likelihood,
    x_init: np.ndarray | None = None,
    cfg: EngineConfig | None = None,
    kernel_factory: KernelFactory | None = None,
    metrics_hook: MetricsHook | None = None,
) -> EngineState:
    """Evaluate the initial design and fit the first model.

    Args:
        prior: Diagonal Gaussian prior.
        likelihood: Maps a point (d,) to ℓ(x) ≥ 0.
        x_init: Initial design; two prior draws when None.
        cfg: Engine configuration.
        kernel_factory: Builds the Nyström kernel from a fitted model;
            the warped posterior covariance by default.
        metrics_hook: Called after every model update to fill trace metrics.

    Returns:
        The initial run state.

    Raises:
        InvalidLikelihoodValueError: If the likelihood returns NaN or −∞.
    """
    start = time.perf_counter()
    cfg = cfg or EngineConfig()
    rng = np.random.default_rng(cfg.seed)
    if x_init is None:
        x_init = mixture_sample(GaussianMixture.single(prior), DEFAULT_INITIAL_POINTS, rng)
    x_init = np.atleast_2d(np.asarray(x_init, dtype=float))

    counter = EvaluationCounter()
    eval_start = time.perf_counter()
    y = await evaluate_batch(likelihood, x_init, counter, cfg.max_workers, cfg.serial_likelihood)
    eval_seconds = time.perf_counter() - eval_start

    params = RbfKernelParams.isotropic(prior.dim, cfg.initial_lengthscale, cfg.initial_variance)
    model = fit(x_init, y, params, alpha_factor=cfg.alpha_factor)
    state = EngineState(
        prior=prior,
        likelihood=likelihood,
        config=cfg,
        model=model,
        rng=rng,
        estimate=evidence(model, prior),
        kernel_factory=kernel_factory or PosteriorCovariance,
        counter=counter,
        metrics_hook=metrics_hook,
    )
    state.initial_record = _record(state, time.perf_counter() - start - eval_seconds)
    logger.info(
        f"Initialised with {model.n} observation(s): "
        f"E[Z]={state.estimate.mean:.6g}, Var[Z]={state.estimate.variance:.3g}"
    )
    return state


def _fresh_rows(candidates: np.ndarray, existing: np.ndarray) -> np.ndarray:
    """Candidates farther than the duplicate tolerance from existing rows and each other."""
    if candidates.shape[0] == 0:
        return candidates
    far = cdist(candidates, existing).min(axis=1) > DUPLICATE_TOLERANCE
    kept: list[np.ndarray] = []
    for row in candidates[far]:
        if all(np.linalg.norm(row - other) > DUPLICATE_TOLERANCE for other in kept):
            kept.append(row)
    return np.asarray(kept).reshape(-1, candidates.shape[1])


def _complete_batch(
    state: EngineState,
    candidates: np.ndarray,
    size: int,
    sparse: GaussianMixture | None,
) -> np.ndarray:
    """Drop collisions with observed points and top up to `size` with fresh draws."""
    batch = _fresh_rows(candidates, state.model.X)
    if batch.shape[0] < candidates.shape[0]:
        logger.warning(
            f"Dropped {candidates.shape[0] - batch.shape[0]} candidate(s) colliding with observations"
        )
    for _ in range(TOP_UP_RETRIES):
        missing = size - batch.shape[0]
        if missing <= 0:
            break
        draws = propose(
            state.model, state.prior, state.config.proposal_config(missing), state.rng, sparse
        ).points
        batch = _fresh_rows(np.vstack([batch, draws]), state.model.X)
    if batch.shape[0] < size:
        logger.warning(f"Batch has {batch.shape[0]} point(s) instead of {size}")
    return batch[:size]


def _update_hypers(state: EngineState, model: WarpedGpModel) -> WarpedGpModel:
    cfg = state.config
    if (state.iteration + 1) % cfg.hyperopt_every != 0:
        return model
    anchor = RbfKernelParams.isotropic(model.dim, cfg.initial_lengthscale, model.params.variance)
    try:
        result = optimize_hypers(
            model,
            cfg.hyperopt_restarts,
            state.rng,
            cfg.hyperopt_max_evals,
            scale=state.prior.std_diag,
            anchor=anchor,
        )
        if result.failed or result.params == model.params:
            return model
        return refit(model, result.params)
    except QuadratureError as e:
        logger.warning(f"Hyperparameter update skipped: {e.message}")
        return model


def converged(state: EngineState) -> bool:
    """Var[Z|y] ≤ k from an estimate that can end the run.

    A variance that was clipped from a negative value, or that comes from
    lengthscales pinned to a bound, is not accepted as convergence.
    """
    if state.estimate.variance > state.config.variance_threshold:
        return False
    if state.estimate.clipped:
        logger.info("Evidence variance was clipped at zero; not treated as converged")
        return False
    if on_lengthscale_bound(state.model.params, state.prior.std_diag):
        logger.info(
            f"Lengthscales {list(state.model.params.lengthscales)} sit on a bound; "
            "not treated as converged"
        )
        return False
    return True


def posterior(state: EngineState) -> PosteriorModel:
    """Posterior of the run's current model.

    Raises:
        EvidenceNotReadyError: If E[Z|y] ≤ 0.
    """
    return build_posterior(state.model, state.prior)


async def step(state: EngineState) -> tuple[EngineState, TraceRecord]:
    """Run one iteration: select a batch, evaluate it, refit.

    The Nyström kernel is built from the model fitted in the previous
    iteration.

    Returns:
        The updated state and the iteration's trace record.
    """
    start = time.perf_counter()
    cfg = state.config
    budget = state.budget_left
    size = min(cfg.batch_size, budget) if budget > 0 else cfg.batch_size

    kernel = state.kernel_factory(state.model)
    sparse = None
    if cfg.proposal is not ProposalKind.IGB:
        sparse = af_mixture_build(state.model, state.prior, cfg.n_recombination)
    landmarks = propose(
        state.model, state.prior, cfg.proposal_config(cfg.nystrom_size), state.rng, sparse
    ).points
    measure = propose(
        state.model, state.prior, cfg.proposal_config(cfg.n_recombination), state.rng, sparse
    )
    basis = nystrom_basis.build(kernel, landmarks, min(size - 1, landmarks.shape[0]))

    def phi(points: np.ndarray) -> np.ndarray:
        return nystrom_basis.eval_test_functions(basis, points)

    def residual(points: np.ndarray) -> np.ndarray:
        return nystrom_basis.residual_sqrt_diag(basis, kernel, points)

    reduced = recombine(
        measure, phi, size, proper=cfg.proper, residual_sqrt=residual, rng=state.rng
    )
    batch = _complete_batch(state, reduced.points, size, sparse)
    logger.debug(
        f"Iteration {state.iteration + 1}: {basis.size} test function(s), "
        f"{len(reduced)} recombined point(s), batch of {batch.shape[0]}"
    )

    eval_start = time.perf_counter()
    values = await evaluate_batch(
        state.likelihood, batch, state.counter, cfg.max_workers, cfg.serial_likelihood
    )
    eval_seconds = time.perf_counter() - eval_start

    model = fit(
        np.vstack([state.model.X, batch]),
        np.concatenate([state.model.y, values]),
        state.model.params,
        alpha_factor=cfg.alpha_factor,
    )
    model = _update_hypers(state, model)

    state.model = model
    state.estimate = evidence(model, state.prior)
    state.iteration += 1
    state.batch_evaluations += batch.shape[0]
    record = _record(state, time.perf_counter() - start - eval_seconds)
    state.trace.append(record)
    logger.info(
        f"Iteration {state.iteration}: evaluations={state.evaluations}, "
        f"E[Z]={record.evidence_mean:.6g}, Var[Z]={record.evidence_variance:.3g}, "
        f"overhead={record.overhead_ms:.1f} ms"
    )
    return state, record


async def run(
    state: EngineState,
    cfg: EngineConfig | None = None,
    checkpoint_path: str | Path | None = None,
) -> tuple[PosteriorModel | None, EvidenceEstimate, list[TraceRecord]]:
    """Step until the run has converged or the evaluation budget is spent.

    Args:
        state: An initialised run.
        cfg: Replacement configuration; the state's own when None.
        checkpoint_path: Write a checkpoint here after every step.

    Returns:
        The final posterior (None while E[Z|y] ≤ 0), the evidence estimate
        and the trace of the steps taken.
    """
    if cfg is not None:
        state.config = cfg
    while not converged(state) and state.budget_left > 0:
        await step(state)
        if checkpoint_path is not None:
            save_checkpoint(state, checkpoint_path)

    try:
        final = posterior(state)
    except EvidenceNotReadyError as e:
        logger.warning(e.message)
        final = None
    return final, state.estimate, list(state.trace)


def resume(
    checkpoint: Checkpoint,
    prior: DiagGaussian,
    likelihood: Likelihood,
    kernel_factory: KernelFactory | None = None,
    metrics_hook: MetricsHook | None = None,
) -> EngineState:
    """Rebuild a run from a checkpoint so that it continues where it stopped."""
    cfg = checkpoint.config
    model = fit(
        np.asarray(checkpoint.X, dtype=float),
        np.asarray(checkpoint.y, dtype=float),
        checkpoint.params,
        alpha_factor=cfg.alpha_factor,
    )
    counter = EvaluationCounter()
    counter.restore(checkpoint.evaluations)
    state = EngineState(
        prior=prior,
        likelihood=likelihood,
        config=cfg,
        model=model,
        rng=restore_rng(checkpoint),
        estimate=evidence(model, prior),
        kernel_factory=kernel_factory or PosteriorCovariance,
        counter=counter,
        iteration=checkpoint.iteration,
        batch_evaluations=checkpoint.batch_evaluations,
        trace=list(checkpoint.trace),
        initial_record=checkpoint.initial_record,
        metrics_hook=metrics_hook,
    )
    logger.info(f"Resumed at iteration {state.iteration} with {model.n} observation(s)")
    return state
