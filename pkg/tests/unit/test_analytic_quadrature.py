"""Unit tests for closed-form evidence moments and posterior densities."""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from batch_quadrature.exceptions import DegenerateSliceError, EvidenceNotReadyError
from batch_quadrature.models import DiagGaussian, RbfKernelParams, WarpedGpModel
from batch_quadrature.services.analytic_quadrature import (
    build_posterior,
    clip_variance,
    evidence,
    evidence_mean,
    evidence_variance,
    likelihood_variance_expansion,
    posterior_conditional,
    posterior_joint_density,
    posterior_marginal,
)
from batch_quadrature.services.gaussian_algebra import mixture_density, normal_pdf
from batch_quadrature.services.warped_gp import PosteriorCovariance, fit, predict_likelihood, predict_warped
from tests.conftest import bump_likelihood

GRID = np.linspace(-12.0, 12.0, 2401)


def _random_model(rng: np.random.Generator, n: int, dim: int) -> WarpedGpModel:
    X = rng.uniform(-2.5, 2.5, size=(n, dim))
    params = RbfKernelParams(
        variance=float(rng.uniform(0.5, 2.0)),
        lengthscales=tuple(float(l) for l in rng.uniform(0.6, 1.5, size=dim)),
    )
    return fit(X, bump_likelihood(X) + 0.05, params)


class TestEvidenceMean:
    """Tests for E[Z|y]."""

    def test_matches_grid_quadrature_1d(
        self, rng: np.random.Generator, prior_1d: DiagGaussian
    ) -> None:
        """Closed form equals ∫ m^L π on a fine grid."""
        for _ in range(10):
            model = _random_model(rng, 4, 1)
            m_l, _ = predict_likelihood(model, GRID[:, None])
            expected = trapezoid(m_l * normal_pdf(GRID[:, None], prior_1d), GRID)
            assert evidence_mean(model, prior_1d) == pytest.approx(expected, rel=1e-6)

    def test_matches_grid_quadrature_2d(self, model_2d: WarpedGpModel, prior_2d: DiagGaussian) -> None:
        """Closed form equals a 2-d trapezoid integral."""
        axis = np.linspace(-10.0, 10.0, 401)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        points = np.column_stack([xx.ravel(), yy.ravel()])
        m_l, _ = predict_likelihood(model_2d, points)
        integrand = (m_l * normal_pdf(points, prior_2d)).reshape(xx.shape)
        expected = trapezoid(trapezoid(integrand, axis, axis=1), axis)
        assert evidence_mean(model_2d, prior_2d) == pytest.approx(expected, rel=1e-6)

    def test_matches_monte_carlo(self, rng: np.random.Generator) -> None:
        """Closed form agrees with a prior Monte Carlo average of m^L within 3 SE."""
        prior = DiagGaussian.isotropic(3, 0.0, 2.0)
        model = _random_model(rng, 8, 3)
        draws = rng.normal(size=(100_000, 3)) * np.sqrt(2.0)
        m_l, _ = predict_likelihood(model, draws)
        standard_error = float(np.std(m_l)) / np.sqrt(draws.shape[0])
        assert abs(evidence_mean(model, prior) - float(np.mean(m_l))) <= 3.0 * standard_error


class TestEvidenceVariance:
    """Tests for Var[Z|y]."""

    def test_matches_double_grid_integral(
        self, rng: np.random.Generator, prior_1d: DiagGaussian
    ) -> None:
        """Closed form equals ∬ π m̃ C̃ m̃ π on a grid."""
        grid = np.linspace(-10.0, 10.0, 801)
        for _ in range(10):
            model = _random_model(rng, 3, 1)
            mean, _ = predict_warped(model, grid[:, None])
            weight = mean * normal_pdf(grid[:, None], prior_1d)
            cov = PosteriorCovariance(model)(grid[:, None], grid[:, None])
            inner = trapezoid(cov * weight[None, :], grid, axis=1)
            expected = trapezoid(weight * inner, grid)
            assert evidence_variance(model, prior_1d) == pytest.approx(
                expected, rel=1e-5, abs=1e-12
            )

    def test_separable_equals_naive(
        self, rng: np.random.Generator, prior_2d: DiagGaussian
    ) -> None:
        """The O(n²) form equals the quadruple loop."""
        for n in (2, 5, 8):
            model = _random_model(rng, n, 2)
            fast = evidence_variance(model, prior_2d)
            slow = evidence_variance(model, prior_2d, naive=True)
            assert fast == pytest.approx(slow, rel=1e-10, abs=1e-14)

    def test_variance_nonnegative(self, model_2d: WarpedGpModel, prior_2d: DiagGaussian) -> None:
        """The returned variance is never negative."""
        estimate = evidence(model_2d, prior_2d)
        assert estimate.variance >= 0
        assert estimate.std == pytest.approx(np.sqrt(estimate.variance))


class TestClipVariance:
    """Tests for clipping negative variances."""

    def test_round_off_is_not_flagged(self) -> None:
        """A difference within round-off is zeroed without the clipped flag."""
        assert clip_variance(1.0, 1.0 + 1e-12) == (0.0, False)

    def test_negative_beyond_tolerance_is_flagged(self) -> None:
        """A clearly negative difference is zeroed and flagged."""
        assert clip_variance(1.0, 1.0 + 1e-6) == (0.0, True)

    def test_positive_passes_through(self) -> None:
        """A positive difference is returned unchanged."""
        assert clip_variance(2.0, 0.5) == (1.5, False)

    def test_evidence_carries_flag(self, model_2d: WarpedGpModel, prior_2d: DiagGaussian) -> None:
        """A well-conditioned model gives an unclipped estimate."""
        estimate = evidence(model_2d, prior_2d)
        assert not estimate.clipped
        assert estimate.variance == pytest.approx(evidence_variance(model_2d, prior_2d))


class TestLikelihoodVarianceExpansion:
    """Tests for the pair-of-pairs expansion of C^L(x, x)."""

    def test_matches_linearised_variance(
        self, model_1d: WarpedGpModel, rng: np.random.Generator
    ) -> None:
        """The expansion agrees with m̃²·C̃ pointwise."""
        x = rng.uniform(-4.0, 4.0, size=(1000, 1))
        _, c_l = predict_likelihood(model_1d, x)
        expansion = likelihood_variance_expansion(model_1d, x)
        np.testing.assert_allclose(expansion, c_l, rtol=1e-6, atol=1e-10)


class TestPosterior:
    """Tests for the posterior mixture."""

    def test_weights_sum_to_one(self, model_2d: WarpedGpModel, prior_2d: DiagGaussian) -> None:
        """The closed-form posterior integrates to one."""
        post = build_posterior(model_2d, prior_2d)
        assert float(post.mixture.weights.sum()) == pytest.approx(1.0, abs=1e-8)
        assert post.prior_weight == pytest.approx(model_2d.alpha / post.evidence_mean)

    def test_mixture_matches_pointwise_density(
        self, model_2d: WarpedGpModel, prior_2d: DiagGaussian, rng: np.random.Generator
    ) -> None:
        """Mixture form equals m^L π / E[Z|y]."""
        post = build_posterior(model_2d, prior_2d)
        x = rng.normal(size=(100, 2)) * 1.5
        np.testing.assert_allclose(
            mixture_density(post.mixture, x), posterior_joint_density(post, x), rtol=1e-6, atol=1e-14
        )

    def test_zero_evidence_raises(self, prior_1d: DiagGaussian) -> None:
        """A model with E[Z|y] = 0 has no posterior."""
        model = fit(np.array([[0.0], [1.0]]), np.zeros(2), RbfKernelParams.isotropic(1, 1.0, 1.0))
        with pytest.raises(EvidenceNotReadyError):
            build_posterior(model, prior_1d)

    def test_marginal_integrates_to_one(
        self, model_2d: WarpedGpModel, prior_2d: DiagGaussian
    ) -> None:
        """Each 1-d marginal integrates to one, in closed form and on a grid."""
        post = build_posterior(model_2d, prior_2d)
        for dim in range(2):
            marginal = posterior_marginal(post, dim)
            assert marginal.integral() == pytest.approx(1.0, abs=1e-8)
            assert trapezoid(marginal(GRID), GRID) == pytest.approx(1.0, abs=1e-6)

    def test_conditional_is_normalised_slice(
        self, model_2d: WarpedGpModel, prior_2d: DiagGaussian
    ) -> None:
        """The conditional is the normalised joint density along the slice."""
        post = build_posterior(model_2d, prior_2d)
        conditional = posterior_conditional(post, [1], [0.3])
        values = conditional(GRID)
        assert trapezoid(values, GRID) == pytest.approx(1.0, abs=1e-6)
        slice_points = np.column_stack([GRID, np.full_like(GRID, 0.3)])
        joint = posterior_joint_density(post, slice_points)
        np.testing.assert_allclose(
            values, joint / trapezoid(joint, GRID), rtol=1e-5, atol=1e-12
        )

    def test_conditional_far_outside_raises(
        self, model_2d: WarpedGpModel, prior_2d: DiagGaussian
    ) -> None:
        """A slice with no posterior mass is reported."""
        post = build_posterior(model_2d, prior_2d)
        with pytest.raises(DegenerateSliceError):
            posterior_conditional(post, [0], [1e6])
