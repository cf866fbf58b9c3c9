"""Integration tests for the batch quadrature loop."""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.distance import cdist, pdist

from batch_quadrature import converged, init, resume, run, step
from batch_quadrature.exceptions import InvalidLikelihoodValueError
from batch_quadrature.models import (
    DiagGaussian,
    EngineConfig,
    EvidenceEstimate,
    Kernel,
    RbfKernelParams,
    WarpedGpModel,
)
from batch_quadrature.services import basq_engine
from batch_quadrature.services.analytic_quadrature import evidence
from batch_quadrature.services.warped_gp import PosteriorCovariance, fit, refit
from batch_quadrature.state import load_checkpoint
from tests.conftest import bump_likelihood

CENTRE = 0.4
WIDTH = 0.7


def small_config(**overrides: object) -> EngineConfig:
    """A configuration small enough to run in well under a second per step."""
    values: dict[str, object] = {
        "batch_size": 4,
        "n_recombination": 1_000,
        "n_nystrom": 20,
        "supersample_ratio": 20,
        "max_evaluations": 12,
        "hyperopt_restarts": 1,
        "hyperopt_max_evals": 40,
        "seed": 7,
    }
    values.update(overrides)
    return EngineConfig.model_validate(values)


def bump(x: np.ndarray) -> float:
    """Scalar Gaussian-bump likelihood."""
    return float(bump_likelihood(x, CENTRE, WIDTH)[0])


def bump_evidence(dim: int, prior_var: float = 2.0) -> float:
    """∫ bump·𝒩(0, prior_var·I) in closed form."""
    per_dim = WIDTH / math.sqrt(WIDTH**2 + prior_var) * math.exp(
        -0.5 * CENTRE**2 / (WIDTH**2 + prior_var)
    )
    return per_dim**dim


class SpyKernelFactory:
    """Records every model it builds a Nyström kernel from."""

    def __init__(self) -> None:
        self.models: list[WarpedGpModel] = []

    def __call__(self, model: WarpedGpModel) -> Kernel:
        self.models.append(model)
        return PosteriorCovariance(model)


class TestInit:
    """Tests for init."""

    async def test_default_design(self, prior_1d: DiagGaussian) -> None:
        """Two prior draws are evaluated and recorded as iteration zero."""
        state = await init(prior_1d, bump, cfg=small_config())
        assert state.model.n == 2
        assert state.evaluations == 2
        assert state.batch_evaluations == 0
        assert state.initial_record is not None
        assert state.initial_record.iteration == 0
        assert state.trace == []

    async def test_single_point_design(self, prior_1d: DiagGaussian) -> None:
        """A one-point design fits with α = 0.8·y₁."""
        state = await init(prior_1d, bump, x_init=np.zeros((1, 1)), cfg=small_config())
        y = bump(np.zeros(1))
        assert state.model.n == 1
        assert state.model.alpha == pytest.approx(0.8 * y)
        assert state.estimate.variance >= 0.0

    async def test_invalid_likelihood(self, prior_1d: DiagGaussian) -> None:
        """NaN from the likelihood aborts initialisation."""
        with pytest.raises(InvalidLikelihoodValueError):
            await init(prior_1d, lambda _x: math.nan, cfg=small_config())


class TestStep:
    """Tests for a single iteration."""

    async def test_observations_grow_by_batch(self, prior_2d: DiagGaussian) -> None:
        """One step adds exactly n distinct observations."""
        state = await init(prior_2d, bump, cfg=small_config())
        state, record = await step(state)
        assert state.model.n == 2 + 4
        assert state.batch_evaluations == 4
        assert record.iteration == 1
        assert record.evaluations == 6
        assert math.isfinite(record.evidence_variance)
        assert record.evidence_variance >= 0.0

    async def test_kernel_built_from_previous_model(self, prior_1d: DiagGaussian) -> None:
        """Each iteration's Nyström kernel comes from the prior iteration's fit."""
        spy = SpyKernelFactory()
        state = await init(prior_1d, bump, cfg=small_config(), kernel_factory=spy)
        before = []
        for _ in range(2):
            before.append(state.model)
            state, _record = await step(state)
        assert len(spy.models) == len(before)
        assert all(seen is fitted for seen, fitted in zip(spy.models, before, strict=True))
        assert [model.n for model in spy.models] == [2, 6]

    async def test_overhead_excludes_likelihood_time(self, prior_1d: DiagGaussian) -> None:
        """Time spent inside the likelihood is not reported as overhead."""

        def slow_bump(x: np.ndarray) -> float:
            time.sleep(0.05)
            return bump(x)

        state = await init(prior_1d, slow_bump, cfg=small_config(serial_likelihood=True))
        start = time.perf_counter()
        state, record = await step(state)
        wall_ms = (time.perf_counter() - start) * 1000.0
        assert record.overhead_ms <= wall_ms - 4 * 50.0 + 1.0
        assert state.counter.likelihood_seconds >= 6 * 0.05

    async def test_short_final_batch(self, prior_1d: DiagGaussian) -> None:
        """The last batch is capped at the remaining budget."""
        state = await init(prior_1d, bump, cfg=small_config(max_evaluations=6))
        state, _record = await step(state)
        state, record = await step(state)
        assert state.batch_evaluations == 6
        assert record.evaluations == 2 + 6

    async def test_batch_points_distinct_and_new(self, prior_2d: DiagGaussian) -> None:
        """A batch has pairwise distinct points, none of them observed before."""
        state = await init(prior_2d, bump, cfg=small_config())
        before = state.model.X.copy()
        state, _record = await step(state)
        batch = state.model.X[before.shape[0] :]
        assert batch.shape == (4, 2)
        assert pdist(batch).min() > 0.0
        assert cdist(batch, before).min() > 0.0


class TestRun:
    """Tests for the run loop."""

    async def test_budget_of_one_batch(self, prior_1d: DiagGaussian) -> None:
        """A budget of exactly n takes exactly one step."""
        state = await init(prior_1d, bump, cfg=small_config(max_evaluations=4))
        post, estimate, trace = await run(state)
        assert len(trace) == 1
        assert estimate == state.estimate
        assert post is not None
        assert post.evidence_mean == pytest.approx(estimate.mean)

    async def test_infinite_threshold(self, prior_1d: DiagGaussian) -> None:
        """k = ∞ returns the initial estimate without stepping."""
        state = await init(prior_1d, bump, cfg=small_config(variance_threshold=math.inf))
        initial = state.estimate
        _post, estimate, trace = await run(state)
        assert trace == []
        assert estimate == initial

    async def test_zero_budget(self, prior_1d: DiagGaussian) -> None:
        """A zero budget returns the initial estimate."""
        state = await init(prior_1d, bump, cfg=small_config(max_evaluations=0))
        _post, _estimate, trace = await run(state)
        assert trace == []
        assert state.evaluations == 2

    async def test_deterministic_per_seed(self, prior_2d: DiagGaussian) -> None:
        """Identical seeds give identical traces apart from overhead."""

        async def trace_of(seed: int) -> list[tuple[int, float, float]]:
            state = await init(prior_2d, bump, cfg=small_config(seed=seed))
            _post, _estimate, trace = await run(state)
            return [(r.evaluations, r.evidence_mean, r.evidence_variance) for r in trace]

        first = await trace_of(3)
        assert first == await trace_of(3)
        assert first != await trace_of(4)

    async def test_evidence_close_on_bump(self, prior_1d: DiagGaussian) -> None:
        """Three batches bring E[Z] close to the closed-form evidence and shrink Var[Z]."""
        state = await init(prior_1d, bump, cfg=small_config())
        _post, estimate, _trace = await run(state)
        final_error = abs(estimate.mean - bump_evidence(1))
        assert final_error < 0.05
        assert state.initial_record is not None
        assert estimate.variance < state.initial_record.evidence_variance

    async def test_checkpoint_resume_matches_uninterrupted(
        self, prior_1d: DiagGaussian, tmp_path: Path
    ) -> None:
        """Stopping after one step and resuming reproduces the full run."""
        full_cfg = small_config()
        reference = await init(prior_1d, bump, cfg=full_cfg)
        _post, expected, expected_trace = await run(reference)

        path = tmp_path / "run.json"
        partial = await init(prior_1d, bump, cfg=small_config(max_evaluations=4))
        await run(partial, checkpoint_path=path)
        resumed = resume(load_checkpoint(path), prior_1d, bump)
        assert resumed.iteration == 1
        assert resumed.evaluations == 6
        _post, estimate, trace = await run(resumed, cfg=full_cfg)

        assert len(trace) == len(expected_trace)
        assert estimate.mean == pytest.approx(expected.mean, rel=1e-12)
        assert estimate.variance == pytest.approx(expected.variance, rel=1e-12)

    async def test_converged_rejects_untrusted_estimates(self, prior_1d: DiagGaussian) -> None:
        """A low variance counts only if it was not clipped and no lengthscale is pinned."""
        state = await init(prior_1d, bump, cfg=small_config(variance_threshold=1e3))
        assert converged(state)
        trusted = state.estimate

        state.estimate = EvidenceEstimate(mean=trusted.mean, variance=0.0, clipped=True)
        assert not converged(state)

        state.estimate = trusted
        state.model = refit(state.model, RbfKernelParams.isotropic(1, 1e-3, 1.0))
        assert not converged(state)

    async def test_clipped_variance_does_not_end_run(
        self, prior_1d: DiagGaussian, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Every step reporting a clipped zero variance still spends the whole budget."""

        def clipped_evidence(model: WarpedGpModel, prior: DiagGaussian) -> EvidenceEstimate:
            estimate = evidence(model, prior)
            return EvidenceEstimate(mean=estimate.mean, variance=0.0, clipped=True)

        monkeypatch.setattr(basq_engine, "evidence", clipped_evidence)
        state = await init(prior_1d, bump, cfg=small_config())
        _post, estimate, trace = await run(state)
        assert estimate.variance == 0.0
        assert len(trace) == 3
        assert state.budget_left == 0

    async def test_pinned_lengthscales_do_not_end_run(
        self, prior_1d: DiagGaussian, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """A variance below the threshold with lengthscales on a bound keeps the run going."""
        state = await init(prior_1d, bump, cfg=small_config(variance_threshold=1e3))
        _post, _estimate, trace = await run(state)
        assert trace == []

        monkeypatch.setattr(basq_engine, "on_lengthscale_bound", lambda _params, _scale: True)
        state = await init(prior_1d, bump, cfg=small_config(variance_threshold=1e3))
        _post, _estimate, trace = await run(state)
        assert len(trace) == 3
        assert all(record.evidence_variance <= 1e3 for record in trace)


@pytest.mark.slow
class TestConvergence:
    """Repeated-seed convergence checks."""

    async def test_mae_decreases_over_three_steps(self, prior_1d: DiagGaussian) -> None:
        """Three steps of n = 10 lower the evidence error in at least 8 of 10 seeds."""
        truth = bump_evidence(1)
        improved = 0
        for seed in range(10):
            cfg = small_config(
                batch_size=10, max_evaluations=30, n_recombination=4_000, n_nystrom=40, seed=seed
            )
            state = await init(prior_1d, bump, cfg=cfg)
            initial_error = abs(state.estimate.mean - truth)
            _post, estimate, trace = await run(state)
            assert len(trace) == 3
            improved += abs(estimate.mean - truth) < initial_error
        assert improved >= 8

    async def test_batch_beats_random_prior_points(self, prior_1d: DiagGaussian) -> None:
        """The selected batch lowers Var[Z] at least as much as prior draws in 8 of 10 seeds."""
        better = 0
        for seed in range(10):
            cfg = small_config(
                max_evaluations=4,
                n_recombination=4_000,
                n_nystrom=40,
                hyperopt_restarts=0,
                seed=seed,
            )
            state = await init(prior_1d, bump, cfg=cfg)
            X0, y0, params = state.model.X, state.model.y, state.model.params
            state, _record = await step(state)

            draws = np.random.default_rng(100 + seed).normal(0.0, math.sqrt(2.0), size=(4, 1))
            y = np.concatenate([y0, bump_likelihood(draws, CENTRE, WIDTH)])
            random_model = fit(np.vstack([X0, draws]), y, params)
            better += state.estimate.variance <= evidence(random_model, prior_1d).variance
        assert better >= 8
