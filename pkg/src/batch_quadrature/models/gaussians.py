"""Diagonal Gaussians and (signed) Gaussian mixtures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from batch_quadrature.exceptions import DimensionMismatchError, InvalidDistributionError


@dataclass(frozen=True)
class DiagGaussian:
    """A multivariate normal 𝒩(x; mean, diag(var_diag))."""

    mean: np.ndarray
    var_diag: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        var_diag = np.atleast_1d(np.asarray(self.var_diag, dtype=float))
        if mean.ndim != 1 or var_diag.ndim != 1:
            raise DimensionMismatchError("DiagGaussian mean and var_diag must be vectors")
        if mean.shape != var_diag.shape:
            raise DimensionMismatchError.for_shapes(
                mean.shape[0], var_diag.shape[0], "DiagGaussian var_diag"
            )
        if not np.all(np.isfinite(var_diag)) or np.any(var_diag <= 0):
            raise InvalidDistributionError.nonpositive_variance(var_diag)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var_diag", var_diag)

    @property
    def dim(self) -> int:
        """Dimension of the distribution."""
        return int(self.mean.shape[0])

    @property
    def std_diag(self) -> np.ndarray:
        """Per-dimension standard deviations."""
        return np.sqrt(self.var_diag)

    def marginal(self, dims: list[int] | int) -> DiagGaussian:
        """Marginal over the given dimensions (diagonal, so just a slice)."""
        index = np.atleast_1d(dims)
        return DiagGaussian(self.mean[index], self.var_diag[index])

    @classmethod
    def isotropic(cls, dim: int, mean: float = 0.0, var: float = 1.0) -> DiagGaussian:
        """Create 𝒩(mean·1, var·I) in the given dimension."""
        return cls(np.full(dim, mean, dtype=float), np.full(dim, var, dtype=float))


@dataclass(frozen=True)
class GaussianMixture:
    """Σ_k w_k 𝒩(x; μ_k, diag σ²_k) with possibly negative weights.

    Components are stored as stacked arrays (K×d) so that densities and
    sampling vectorise; `components` materialises them as DiagGaussians.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self) -> None:
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        means = np.asarray(self.means, dtype=float)
        variances = np.asarray(self.variances, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        if variances.ndim == 1:
            variances = variances[:, None]
        if means.shape[0] != weights.shape[0]:
            raise InvalidDistributionError.length_mismatch(weights.shape[0], means.shape[0])
        if variances.shape != means.shape:
            raise DimensionMismatchError.for_shapes(
                means.shape[1], variances.shape[1], "mixture variances"
            )
        if not np.all(np.isfinite(weights)):
            raise InvalidDistributionError("Mixture weights must be finite")
        if np.any(variances <= 0):
            raise InvalidDistributionError.nonpositive_variance(variances.min(axis=0))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def dim(self) -> int:
        """Dimension of the components."""
        return int(self.means.shape[1])

    @property
    def n_components(self) -> int:
        """Number of components."""
        return int(self.weights.shape[0])

    @property
    def components(self) -> list[DiagGaussian]:
        """The components as individual DiagGaussians."""
        return [DiagGaussian(m, v) for m, v in zip(self.means, self.variances, strict=True)]

    @property
    def is_nonnegative(self) -> bool:
        """True if every weight is ≥ 0."""
        return bool(np.all(self.weights >= 0))

    @classmethod
    def from_components(
        cls, weights: np.ndarray | list[float], components: list[DiagGaussian]
    ) -> GaussianMixture:
        """Build a mixture from a weight vector and a list of DiagGaussians."""
        weights = np.atleast_1d(np.asarray(weights, dtype=float))
        if weights.shape[0] != len(components):
            raise InvalidDistributionError.length_mismatch(weights.shape[0], len(components))
        if not components:
            raise InvalidDistributionError.empty_mixture()
        return cls(
            weights,
            np.stack([c.mean for c in components]),
            np.stack([c.var_diag for c in components]),
        )

    @classmethod
    def single(cls, g: DiagGaussian, weight: float = 1.0) -> GaussianMixture:
        """Wrap one Gaussian as a mixture."""
        return cls(np.array([weight]), g.mean[None, :], g.var_diag[None, :])

    def normalized(self) -> GaussianMixture:
        """Rescale weights to sum to one."""
        total = float(self.weights.sum())
        if total <= 0:
            raise InvalidDistributionError.empty_mixture()
        return GaussianMixture(self.weights / total, self.means, self.variances)

    def marginal(self, dims: list[int] | int) -> GaussianMixture:
        """Marginal mixture over the given dimensions."""
        index = np.atleast_1d(dims)
        return GaussianMixture(self.weights, self.means[:, index], self.variances[:, index])
