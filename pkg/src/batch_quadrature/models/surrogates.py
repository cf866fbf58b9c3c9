"""Fitted surrogate models: warped GP, posterior mixture and Nyström basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from batch_quadrature.models.gaussians import DiagGaussian, GaussianMixture
from batch_quadrature.models.kernels import Kernel, RbfKernelParams


@dataclass(frozen=True)
class WarpedGpModel:
    """Square-root warped GP fitted to likelihood observations.

    Attributes:
        X: Deduplicated observation matrix (n×d).
        y: Observed likelihood values (n).
        alpha: Warp offset; ℓ = α + ½ℓ̃².
        y_warped: ỹ = √(2·max(y − α, 0)).
        woodbury: ω = (K_XX + jitter·I)⁻¹ỹ.
        inv_kernel: Ω = (K_XX + jitter·I)⁻¹.
        chol: Lower Cholesky factor of K_XX + jitter·I.
        params: Kernel hyperparameters.
        jitter: Diagonal jitter that made the factorisation succeed.
    """

    X: np.ndarray
    y: np.ndarray
    alpha: float
    y_warped: np.ndarray
    woodbury: np.ndarray
    inv_kernel: np.ndarray
    chol: np.ndarray
    params: RbfKernelParams
    jitter: float

    @property
    def n(self) -> int:
        """Number of (deduplicated) observations."""
        return int(self.X.shape[0])

    @property
    def dim(self) -> int:
        """Input dimension."""
        return int(self.X.shape[1])


@dataclass(frozen=True)
class PosteriorModel:
    """Posterior p(x) = m^L(x)π(x)/E[Z|y] with its Gaussian-mixture form.

    `mixture` holds the α/E[Z]-weighted prior as its first component followed
    by the pairwise terms w^p_ij 𝒩(x; μ_p,ij, Σ_p) (symmetric pairs merged),
    so its weights sum to one.
    """

    model: WarpedGpModel
    prior: DiagGaussian
    evidence_mean: float
    mixture: GaussianMixture

    @property
    def dim(self) -> int:
        """Input dimension."""
        return self.prior.dim

    @property
    def prior_weight(self) -> float:
        """α / E[Z|y], the weight of the prior-shaped term."""
        return float(self.mixture.weights[0])


@dataclass(frozen=True)
class NystromBasis:
    """Spectral test functions φ_i(x) = u_iᵀK(X_nys, x).

    Attributes:
        landmarks: X_nys (M×d).
        eigvals: λ_1 ≥ … ≥ λ_k > 0 (k ≤ n_test).
        eigvecs: u_i as columns (M×k), orthonormal.
        kernel: The kernel the basis was built from.
    """

    landmarks: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    kernel: Kernel

    @property
    def size(self) -> int:
        """Number of test functions."""
        return int(self.eigvals.shape[0])

    @property
    def is_empty(self) -> bool:
        """True when the spectrum collapsed and no test function survived."""
        return self.size == 0
