"""Closed-form identities for diagonal Gaussians and signed mixtures.

Every covariance handled here is diagonal, so densities, products and
convolutions factor into per-dimension scalars. Products of many densities
are accumulated in log space one dimension at a time.
"""

import numpy as np
from scipy.spatial.distance import cdist

from batch_quadrature.exceptions import DimensionMismatchError, InvalidDistributionError
from batch_quadrature.models import DiagGaussian, GaussianMixture

LOG_2PI = float(np.log(2.0 * np.pi))

# Upper bound on (points × components) evaluated at once.
_CHUNK_ENTRIES = 4_000_000


def as_points(x: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce a point or point array to a (m, dim) matrix.

    Args:
        x: A single point (dim,) or an array of points (m, dim).
        dim: The expected dimension.

    Returns:
        The (m, dim) matrix and whether the input was a single point.
    """
    arr = np.asarray(x, dtype=float)
    single = False
    if arr.ndim == 0:
        arr, single = arr.reshape(1, 1), True
    elif arr.ndim == 1 and arr.shape[0] == dim:
        arr, single = arr[None, :], True
    elif arr.ndim == 1 and dim == 1:
        # A vector of scalar points.
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionMismatchError.for_shapes(dim, arr.shape[-1], "point")
    return arr, single


def normal_log_pdf(x: np.ndarray, g: DiagGaussian) -> float | np.ndarray:
    """log 𝒩(x; g.mean, diag g.var_diag).

    Args:
        x: A point (d,) or points (m, d).
        g: The Gaussian.

    Returns:
        A float for a single point, otherwise an array of shape (m,).
    """
    points, single = as_points(x, g.dim)
    diff = points - g.mean
    log_pdf = -0.5 * (
        np.sum(diff**2 / g.var_diag, axis=1) + np.sum(np.log(g.var_diag)) + g.dim * LOG_2PI
    )
    return float(log_pdf[0]) if single else log_pdf


def normal_pdf(x: np.ndarray, g: DiagGaussian) -> float | np.ndarray:
    """𝒩(x; g.mean, diag g.var_diag)."""
    return np.exp(normal_log_pdf(x, g))


def product_pair(g1: DiagGaussian, g2: DiagGaussian) -> tuple[float, DiagGaussian]:
    """Product of two Gaussian densities as a scaled Gaussian.

    𝒩(x; m1, Σ1)·𝒩(x; m2, Σ2) = scale·𝒩(x; m_c, Σ_c) with
    Σ_c⁻¹ = Σ1⁻¹ + Σ2⁻¹, m_c = Σ_c(Σ1⁻¹m1 + Σ2⁻¹m2) and
    scale = 𝒩(m1; m2, Σ1 + Σ2).

    Args:
        g1: First factor.
        g2: Second factor.

    Returns:
        (scale, result)
    """
    if g1.dim != g2.dim:
        raise DimensionMismatchError.for_shapes(g1.dim, g2.dim, "product_pair operand")
    var_c = 1.0 / (1.0 / g1.var_diag + 1.0 / g2.var_diag)
    mean_c = var_c * (g1.mean / g1.var_diag + g2.mean / g2.var_diag)
    scale = normal_pdf(g1.mean, DiagGaussian(g2.mean, g1.var_diag + g2.var_diag))
    return float(scale), DiagGaussian(mean_c, var_c)


def product_with_gaussian(
    means: np.ndarray, var: np.ndarray, g: DiagGaussian
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised `product_pair` of K same-covariance components with one Gaussian.

    Args:
        means: Component means (K, d).
        var: Shared component variance diagonal (d,).
        g: The Gaussian every component is multiplied with.

    Returns:
        (log_scales (K,), product means (K, d), product variance (d,))
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    var = np.asarray(var, dtype=float)
    if means.shape[1] != g.dim:
        raise DimensionMismatchError.for_shapes(g.dim, means.shape[1], "component means")
    var_c = 1.0 / (1.0 / var + 1.0 / g.var_diag)
    means_c = var_c * (means / var + g.mean / g.var_diag)
    log_scales = pairwise_log_normal(means, g.mean[None, :], var + g.var_diag)[:, 0]
    return log_scales, means_c, var_c


def pairwise_log_normal(A: np.ndarray, B: np.ndarray, var: np.ndarray) -> np.ndarray:
    """Matrix of log 𝒩(A_i; B_j, diag var).

    Args:
        A: Points (m, d).
        B: Points (p, d).
        var: Shared variance diagonal (d,).

    Returns:
        Array of shape (m, p).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    var = np.broadcast_to(np.asarray(var, dtype=float), (A.shape[1],))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError.for_shapes(A.shape[1], B.shape[1], "pairwise points")
    out = np.full((A.shape[0], B.shape[0]), -0.5 * (np.sum(np.log(var)) + A.shape[1] * LOG_2PI))
    for k in range(A.shape[1]):
        out -= 0.5 * (A[:, k, None] - B[None, :, k]) ** 2 / var[k]
    return out


def component_log_pdf(points: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """log 𝒩(x_i; μ_k, diag σ²_k) for every point/component pair, shape (m, K).

    Components sharing a variance diagonal are evaluated together as one
    scaled squared-distance matrix.
    """
    unique, inverse = np.unique(variances, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    log_norm = -0.5 * (np.sum(np.log(unique), axis=1) + means.shape[1] * LOG_2PI)
    if unique.shape[0] == 1:
        scale = np.sqrt(unique[0])
        return log_norm[0] - 0.5 * cdist(points / scale, means / scale, "sqeuclidean")
    out = np.empty((points.shape[0], means.shape[0]))
    for group, var in enumerate(unique):
        members = np.flatnonzero(inverse == group)
        scale = np.sqrt(var)
        out[:, members] = log_norm[group] - 0.5 * cdist(
            points / scale, means[members] / scale, "sqeuclidean"
        )
    return out


def mixture_densities(
    means: np.ndarray, variances: np.ndarray, weights: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """Σ_k W_kj·𝒩(x_i; μ_k, Σ_k) for every weight column j, shape (m, J).

    Several mixtures over the same components share one pass over the
    component densities.
    """
    chunk = max(1, _CHUNK_ENTRIES // max(means.shape[0], 1))
    values = np.empty((points.shape[0], weights.shape[1]))
    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk]
        values[start : start + chunk] = np.exp(component_log_pdf(block, means, variances)) @ weights
    return values


def mixture_density(mix: GaussianMixture, x: np.ndarray) -> float | np.ndarray:
    """Σ_k w_k·𝒩(x; μ_k, Σ_k); negative values are possible for signed mixtures.

    Args:
        mix: The mixture.
        x: A point (d,) or points (m, d).

    Returns:
        A float for a single point, otherwise an array of shape (m,).
    """
    points, single = as_points(x, mix.dim)
    values = mixture_densities(mix.means, mix.variances, mix.weights[:, None], points)[:, 0]
    return float(values[0]) if single else values


def mixture_integral(mix: GaussianMixture) -> float:
    """∫ mix(x) dx = Σ_k w_k."""
    return float(np.sum(mix.weights))


def mixture_sample(
    mix: GaussianMixture, count: int, rng: np.random.Generator | int | None = None
) -> np.ndarray:
    """Draw i.i.d. points from a nonnegative mixture.

    A component index is drawn from the categorical distribution over the
    normalised weights, then a normal draw from that component.

    Args:
        mix: A mixture with nonnegative weights and positive total.
        count: Number of draws.
        rng: Generator or seed.

    Returns:
        Points of shape (count, d).

    Raises:
        InvalidDistributionError: If any weight is negative or all are zero.
    """
    negative = int(np.sum(mix.weights < 0))
    if negative:
        raise InvalidDistributionError.negative_weights(negative)
    total = float(mix.weights.sum())
    if total <= 0:
        raise InvalidDistributionError.empty_mixture()
    rng = np.random.default_rng(rng)
    index = rng.choice(mix.n_components, size=count, p=mix.weights / total)
    noise = rng.standard_normal((count, mix.dim))
    return mix.means[index] + np.sqrt(mix.variances[index]) * noise
