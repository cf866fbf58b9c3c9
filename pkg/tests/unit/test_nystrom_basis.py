"""Unit tests for Nyström test functions."""

import numpy as np
import pytest

from batch_quadrature.exceptions import NystromError
from batch_quadrature.models import RbfKernelParams, WarpedGpModel
from batch_quadrature.services import nystrom_basis
from batch_quadrature.services.warped_gp import PosteriorCovariance, RbfKernel


@pytest.fixture
def kernel() -> RbfKernel:
    """A 2-d squared-exponential kernel."""
    return RbfKernel(RbfKernelParams(variance=1.3, lengthscales=(0.8, 1.2)))


class TestBuild:
    """Tests for building the basis."""

    def test_eigenvalues_descending_and_vectors_orthonormal(
        self, kernel: RbfKernel, rng: np.random.Generator
    ) -> None:
        """Top eigenpairs come sorted with orthonormal vectors."""
        basis = nystrom_basis.build(kernel, rng.normal(size=(60, 2)), 10)
        assert basis.size == 10
        assert np.all(np.diff(basis.eigvals) <= 0)
        np.testing.assert_allclose(basis.eigvecs.T @ basis.eigvecs, np.eye(10), atol=1e-10)

    def test_too_few_landmarks(self, kernel: RbfKernel, rng: np.random.Generator) -> None:
        """More test functions than landmarks is an error."""
        with pytest.raises(NystromError):
            nystrom_basis.build(kernel, rng.normal(size=(5, 2)), 6)

    def test_zero_kernel_gives_empty_basis(self, rng: np.random.Generator) -> None:
        """A vanishing kernel leaves no test functions."""

        class ZeroKernel:
            def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
                return np.zeros((np.atleast_2d(a).shape[0], np.atleast_2d(b).shape[0]))

            def diag(self, a: np.ndarray) -> np.ndarray:
                return np.zeros(np.atleast_2d(a).shape[0])

        basis = nystrom_basis.build(ZeroKernel(), rng.normal(size=(10, 2)), 4)
        assert basis.is_empty
        assert nystrom_basis.eval_test_functions(basis, np.zeros((3, 2))).shape == (0, 3)

    def test_repeated_landmarks_keep_full_basis(
        self, kernel: RbfKernel, rng: np.random.Generator
    ) -> None:
        """A singular landmark matrix is regularised by jitter, not truncated."""
        distinct = rng.normal(size=(6, 2))
        landmarks = np.vstack([distinct, distinct])
        basis = nystrom_basis.build(kernel, landmarks, 12)
        assert basis.size == 12
        assert basis.eigvals.min() > 0.5 * nystrom_basis.NYSTROM_JITTER * 1.3
        diag = nystrom_basis.approx_kernel_diag(basis, rng.normal(size=(20, 2)))
        assert np.all(np.isfinite(diag))
        assert np.all(diag <= 1.3 + 1e-6)


class TestApproximation:
    """Tests for the low-rank kernel and its residual."""

    def test_exact_on_landmarks_at_full_rank(
        self, kernel: RbfKernel, rng: np.random.Generator
    ) -> None:
        """With every eigenpair kept K₀ reproduces K on the landmarks."""
        landmarks = rng.uniform(-3, 3, size=(12, 2))
        basis = nystrom_basis.build(kernel, landmarks, 12)
        np.testing.assert_allclose(
            nystrom_basis.approx_kernel(basis, landmarks, landmarks),
            kernel(landmarks, landmarks),
            atol=1e-6,
        )

    def test_residual_decreases_with_basis_size(
        self, kernel: RbfKernel, rng: np.random.Generator
    ) -> None:
        """k₁(x, x) shrinks pointwise as test functions are added."""
        landmarks = rng.normal(size=(80, 2))
        x = rng.normal(size=(200, 2))
        previous = None
        for size in (2, 5, 10, 20):
            basis = nystrom_basis.build(kernel, landmarks, size)
            residual = nystrom_basis.residual_sqrt_diag(basis, kernel, x)
            if previous is not None:
                assert np.all(residual <= previous + 1e-9)
            previous = residual

    def test_posterior_covariance_kernel_is_accepted(
        self, model_2d: WarpedGpModel, rng: np.random.Generator
    ) -> None:
        """The warped posterior covariance works as a basis kernel."""
        kernel = PosteriorCovariance(model_2d)
        basis = nystrom_basis.build(kernel, rng.normal(size=(50, 2)) * 2.0, 8)
        phi = nystrom_basis.eval_test_functions(basis, rng.normal(size=(30, 2)))
        assert phi.shape == (basis.size, 30)
        assert np.all(nystrom_basis.residual_sqrt_diag(basis, kernel, rng.normal(size=(30, 2))) >= 0)
