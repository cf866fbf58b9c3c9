"""Closed-form evidence moments and posterior densities under the warped GP.

With v the normalised kernel variance, W the kernel lengthscale matrix and a
Gaussian prior π = 𝒩(μ, S), the warped GP mean is m̃(x) = Σ_i ω_i v 𝒩(x; X_i, W)
and every quantity below reduces to sums of Gaussian densities over pairs of
observations. The pair matrix

    E_ij = 𝒩(X_i; X_j, 2W)·𝒩((X_i + X_j)/2; μ, W/2 + S)

carries all prior interaction: E[Z|y] = α + ½v²·ωᵀEω.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from batch_quadrature.exceptions import (
    DegenerateSliceError,
    DimensionMismatchError,
    EvidenceNotReadyError,
)
from batch_quadrature.models import (
    DiagGaussian,
    EvidenceEstimate,
    GaussianMixture,
    PosteriorModel,
    WarpedGpModel,
)
from batch_quadrature.services.gaussian_algebra import (
    as_points,
    component_log_pdf,
    mixture_density,
    normal_pdf,
    pairwise_log_normal,
)
from batch_quadrature.services.warped_gp import predict_likelihood

logger = logging.getLogger(__name__)

NEGATIVE_VARIANCE_TOLERANCE = 1e-10


def _check_prior(model: WarpedGpModel, prior: DiagGaussian) -> None:
    if prior.dim != model.dim:
        raise DimensionMismatchError.for_shapes(model.dim, prior.dim, "prior")


def pair_log_matrix(model: WarpedGpModel, prior: DiagGaussian) -> np.ndarray:
    """log E_ij for every pair of observations, shape (n, n)."""
    _check_prior(model, prior)
    w_diag = model.params.w_diag
    X = model.X
    log_e = pairwise_log_normal(X, X, 2.0 * w_diag)
    var = 0.5 * w_diag + prior.var_diag
    log_e -= 0.5 * np.sum(np.log(2.0 * np.pi * var))
    for k in range(model.dim):
        centre = 0.5 * (X[:, k, None] + X[None, :, k])
        log_e -= 0.5 * (centre - prior.mean[k]) ** 2 / var[k]
    return log_e


def evidence_mean(model: WarpedGpModel, prior: DiagGaussian) -> float:
    """E[Z|y] = α + Σ_ij ½v²ω_iω_j·E_ij.

    Args:
        model: Fitted warped GP.
        prior: Diagonal Gaussian prior.

    Returns:
        The posterior mean of the evidence.
    """
    v = model.params.normalized_variance
    pair = np.exp(pair_log_matrix(model, prior))
    return float(model.alpha + 0.5 * v**2 * (model.woodbury @ pair @ model.woodbury))


def _prior_products(
    model: WarpedGpModel, prior: DiagGaussian
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Components of m̃(x)π(x) = Σ_i ω_i v c_i 𝒩(x; a_i, P).

    Returns:
        (log c_i (n,), a_i (n, d), P (d,))
    """
    w_diag = model.params.w_diag
    log_c = pairwise_log_normal(model.X, prior.mean[None, :], w_diag + prior.var_diag)[:, 0]
    var_p = 1.0 / (1.0 / w_diag + 1.0 / prior.var_diag)
    means = var_p * (model.X / w_diag + prior.mean / prior.var_diag)
    return log_c, means, var_p


def _variance_terms(model: WarpedGpModel, prior: DiagGaussian, naive: bool) -> tuple[float, float]:
    v = model.params.normalized_variance
    w_diag = model.params.w_diag
    omega = model.woodbury
    log_c, means, var_p = _prior_products(model, prior)
    cross = np.exp(pairwise_log_normal(means, means, 2.0 * var_p + w_diag) + log_c[:, None] + log_c)
    pair = np.exp(pair_log_matrix(model, prior))

    first = v**3 * float(omega @ cross @ omega)
    if naive:
        second = 0.0
        n = model.n
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        second += omega[i] * omega[j] * model.inv_kernel[k, l] * pair[i, k] * pair[l, j]
        second *= v**4
    else:
        projected = pair @ omega
        second = v**4 * float(projected @ model.inv_kernel @ projected)
    return first, second


def clip_variance(first: float, second: float) -> tuple[float, bool]:
    """max(first − second, 0) and whether the difference was negative beyond round-off."""
    variance = first - second
    clipped = variance < -NEGATIVE_VARIANCE_TOLERANCE * max(1.0, first)
    if clipped:
        logger.warning(f"Evidence variance {variance:.3g} is negative beyond tolerance; clipped")
    return max(variance, 0.0), bool(clipped)


def evidence_variance(model: WarpedGpModel, prior: DiagGaussian, naive: bool = False) -> float:
    """Var[Z|y] = ∫∫ π(x) m̃(x) C̃(x, x′) m̃(x′) π(x′) dx dx′, clipped at 0.

    The double integral splits into

        v³ Σ_ij ω_iω_j c_i c_j 𝒩(a_i; a_j, 2P + W)  −  v⁴ (Eω)ᵀ Ω (Eω)

    where the second term is the separable form of the quadruple sum
    v⁴ Σ_ijkl ω_iω_jΩ_kl E_ik E_lj.

    Args:
        model: Fitted warped GP.
        prior: Diagonal Gaussian prior.
        naive: Evaluate the quadruple sum term by term (O(n⁴)).

    Returns:
        The posterior variance of the evidence.
    """
    variance, _clipped = clip_variance(*_variance_terms(model, prior, naive))
    return variance


def evidence(model: WarpedGpModel, prior: DiagGaussian) -> EvidenceEstimate:
    """Both evidence moments as an EvidenceEstimate, flagging a clipped variance."""
    variance, clipped = clip_variance(*_variance_terms(model, prior, naive=False))
    return EvidenceEstimate(mean=evidence_mean(model, prior), variance=variance, clipped=clipped)


def likelihood_variance_expansion(model: WarpedGpModel, x: np.ndarray) -> float | np.ndarray:
    """C^L(x, x) = m̃(x)²·C̃(x, x) expanded as a sum of Gaussians over pairs of pairs.

    Much slower than `predict_likelihood`; useful to cross-check it.
    """
    points, single = as_points(x, model.dim)
    v = model.params.normalized_variance
    w_diag = model.params.w_diag
    n = model.n
    log_pair = pairwise_log_normal(model.X, model.X, 2.0 * w_diag).ravel()
    centres = (0.5 * (model.X[:, None, :] + model.X[None, :, :])).reshape(n * n, model.dim)
    mean_weights = v**2 * np.outer(model.woodbury, model.woodbury).ravel() * np.exp(log_pair)
    cov_weights = v**2 * model.inv_kernel.ravel() * np.exp(log_pair)
    centre_overlap = np.exp(pairwise_log_normal(centres, centres, w_diag))
    coupling = np.outer(mean_weights, cov_weights) * centre_overlap
    midpoints = 0.5 * (centres[:, None, :] + centres[None, :, :])

    values = np.empty(points.shape[0])
    for index, point in enumerate(points):
        square = mean_weights @ np.exp(
            pairwise_log_normal(point[None, :], centres, 0.5 * w_diag)[0]
        )
        log_mid = -0.5 * np.sum(
            (point - midpoints) ** 2 / (0.25 * w_diag) + np.log(2.0 * np.pi * 0.25 * w_diag),
            axis=-1,
        )
        values[index] = model.params.variance * square - float(np.sum(coupling * np.exp(log_mid)))
    return float(values[0]) if single else values


def build_posterior(model: WarpedGpModel, prior: DiagGaussian) -> PosteriorModel:
    """The posterior p(x) = m^L(x)π(x)/E[Z|y] in Gaussian-mixture form.

    Component 0 is the prior with weight α/E[Z|y]; the others are the
    symmetric pair terms (i ≤ j) with common covariance Σ_p = (2W⁻¹ + S⁻¹)⁻¹.

    Raises:
        EvidenceNotReadyError: If E[Z|y] ≤ 0.
    """
    mean = evidence_mean(model, prior)
    if mean <= 0:
        raise EvidenceNotReadyError.nonpositive(mean)
    v = model.params.normalized_variance
    w_diag = model.params.w_diag
    upper_i, upper_j = np.triu_indices(model.n)
    multiplicity = np.where(upper_i == upper_j, 1.0, 2.0)
    log_pair = pair_log_matrix(model, prior)[upper_i, upper_j]
    weights = (
        0.5
        * v**2
        * model.woodbury[upper_i]
        * model.woodbury[upper_j]
        * multiplicity
        * np.exp(log_pair)
        / mean
    )
    var_p = 1.0 / (2.0 / w_diag + 1.0 / prior.var_diag)
    centres = 0.5 * (model.X[upper_i] + model.X[upper_j])
    means = var_p * (2.0 * centres / w_diag + prior.mean / prior.var_diag)

    mixture = GaussianMixture(
        np.concatenate([[model.alpha / mean], weights]),
        np.vstack([prior.mean[None, :], means]),
        np.vstack([prior.var_diag[None, :], np.broadcast_to(var_p, means.shape)]),
    )
    logger.debug(f"Posterior mixture with {mixture.n_components} component(s)")
    return PosteriorModel(model=model, prior=prior, evidence_mean=mean, mixture=mixture)


def posterior_joint_density(post: PosteriorModel, x: np.ndarray) -> float | np.ndarray:
    """p(x) = m^L(x)·π(x)/E[Z|y], evaluated pointwise.

    Raises:
        EvidenceNotReadyError: If E[Z|y] ≤ 0.
    """
    if post.evidence_mean <= 0:
        raise EvidenceNotReadyError.nonpositive(post.evidence_mean)
    m_l, _ = predict_likelihood(post.model, x)
    density = np.maximum(m_l, 0.0) * normal_pdf(x, post.prior) / post.evidence_mean
    return float(density) if np.ndim(density) == 0 else density


@dataclass(frozen=True)
class MarginalPosterior:
    """One-dimensional marginal of the posterior mixture.

    Component 0 of `mixture` is the α/E[Z|y]-weighted prior marginal.
    """

    dim: int
    mixture: GaussianMixture

    @property
    def prior_weight(self) -> float:
        """Weight of the prior-shaped offset term."""
        return float(self.mixture.weights[0])

    def __call__(self, x: np.ndarray) -> float | np.ndarray:
        return mixture_density(self.mixture, x)

    def integral(self) -> float:
        """Closed-form total mass."""
        return float(np.sum(self.mixture.weights))


def posterior_marginal(post: PosteriorModel, dim: int) -> MarginalPosterior:
    """Marginal posterior of one coordinate."""
    if not 0 <= dim < post.dim:
        raise DimensionMismatchError(f"Dimension index {dim} outside [0, {post.dim})")
    return MarginalPosterior(dim=dim, mixture=post.mixture.marginal([dim]))


@dataclass(frozen=True)
class ConditionalPosterior:
    """Posterior of one free coordinate given the others, normalised."""

    free_dim: int
    fixed_dims: tuple[int, ...]
    fixed_vals: tuple[float, ...]
    mixture: GaussianMixture

    def __call__(self, x: np.ndarray) -> float | np.ndarray:
        return mixture_density(self.mixture, x)


def posterior_conditional(
    post: PosteriorModel, fixed_dims: list[int], fixed_vals: list[float]
) -> ConditionalPosterior:
    """Condition the posterior on all but one coordinate.

    Components have diagonal covariances, so each conditional component is its
    free-dimension marginal; only the weights change, by the density of the
    fixed values under each component.

    Raises:
        DimensionMismatchError: Unless exactly one dimension is left free.
        DegenerateSliceError: If the slice carries no posterior mass.
    """
    fixed = [int(d) for d in fixed_dims]
    free = sorted(set(range(post.dim)) - set(fixed))
    if len(free) != 1 or len(fixed) != post.dim - 1 or len(fixed_vals) != len(fixed):
        raise DimensionMismatchError.for_shapes(post.dim - 1, len(fixed), "fixed dimensions")
    mix = post.mixture
    log_scale = component_log_pdf(
        np.asarray(fixed_vals, dtype=float)[None, :], mix.means[:, fixed], mix.variances[:, fixed]
    )[0]
    with np.errstate(divide="ignore"):
        log_weights = np.log(np.abs(mix.weights)) + log_scale
    log_total, sign = logsumexp(log_weights, b=np.sign(mix.weights), return_sign=True)
    if sign <= 0 or not np.isfinite(log_total) or log_total < np.log(np.finfo(float).tiny):
        raise DegenerateSliceError.zero_mass(fixed, fixed_vals)
    weights = np.sign(mix.weights) * np.exp(log_weights - log_total)
    return ConditionalPosterior(
        free_dim=free[0],
        fixed_dims=tuple(fixed),
        fixed_vals=tuple(float(v) for v in fixed_vals),
        mixture=GaussianMixture(weights, mix.means[:, free], mix.variances[:, free]),
    )

