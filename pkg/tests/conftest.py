"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from batch_quadrature.models import DiagGaussian, RbfKernelParams, WarpedGpModel
from batch_quadrature.services.warped_gp import fit

PRIOR_VARIANCE = 2.0


def bump_likelihood(x: np.ndarray, centre: float = 0.4, width: float = 0.7) -> np.ndarray:
    """Unnormalised Gaussian bump exp(−½|x − centre|²/width²), rows of x are points."""
    points = np.atleast_2d(x)
    return np.exp(-0.5 * np.sum((points - centre) ** 2, axis=1) / width**2)


@pytest.fixture
def rng() -> np.random.Generator:
    """A fixed-seed generator for each test."""
    return np.random.default_rng(20240601)


@pytest.fixture
def prior_1d() -> DiagGaussian:
    """The benchmark prior 𝒩(0, 2) in one dimension."""
    return DiagGaussian.isotropic(1, 0.0, PRIOR_VARIANCE)


@pytest.fixture
def prior_2d() -> DiagGaussian:
    """The benchmark prior 𝒩(0, 2I) in two dimensions."""
    return DiagGaussian.isotropic(2, 0.0, PRIOR_VARIANCE)


@pytest.fixture
def model_1d() -> WarpedGpModel:
    """Warped GP on five well separated observations of a 1-d bump."""
    X = np.array([[-2.0], [-0.8], [0.3], [1.1], [2.4]])
    return fit(X, bump_likelihood(X), RbfKernelParams.isotropic(1, 0.9, 1.2))


@pytest.fixture
def model_2d() -> WarpedGpModel:
    """Warped GP on six observations of a 2-d bump."""
    X = np.array(
        [[-1.5, 0.2], [-0.4, -1.1], [0.3, 0.5], [1.2, -0.3], [0.8, 1.4], [-0.9, 1.0]]
    )
    return fit(X, bump_likelihood(X), RbfKernelParams(variance=1.1, lengthscales=(0.9, 1.1)))
