"""Proposal distributions for subsampling candidate quadrature points.

The proposal mixes two samplers, g(x) = (1 − r)·f(x) + r·q_A(x):

* f(x) ∝ |m̃(x)|π(x), the measure the evidence is integrated against once
  the warp is factorised out;
* q_A, either the acquisition density p_A(x) ∝ C̃(x, x)π(x) (IVR and UB)
  or a mixture around observations with positive likelihood (IGB).

Both f and p_A are signed Gaussian mixtures. They are sampled by drawing
from a nonnegative mixture that covers them, then reweighting by the exact
density and resampling (SMC).
"""

import logging
from dataclasses import dataclass

import numpy as np

from batch_quadrature.models import (
    DiagGaussian,
    GaussianMixture,
    ProposalConfig,
    ProposalKind,
    WarpedGpModel,
    WeightedPointSet,
)
from batch_quadrature.services.analytic_quadrature import pair_log_matrix
from batch_quadrature.services.gaussian_algebra import (
    mixture_densities,
    mixture_density,
    mixture_sample,
    normal_pdf,
    pairwise_log_normal,
)
from batch_quadrature.services.warped_gp import predict_warped, predict_warped_mean

logger = logging.getLogger(__name__)


def _has_data(model: WarpedGpModel | None) -> bool:
    return model is not None and model.n > 0


def f_mixture(model: WarpedGpModel, prior: DiagGaussian) -> GaussianMixture:
    """m̃(x)π(x) = Σ_i ω_i v 𝒩(X_i; μ, W + S)·𝒩(x; a_i, P) as a signed mixture."""
    w_diag = model.params.w_diag
    log_c = pairwise_log_normal(model.X, prior.mean[None, :], w_diag + prior.var_diag)[:, 0]
    var_p = 1.0 / (1.0 / w_diag + 1.0 / prior.var_diag)
    means = var_p * (model.X / w_diag + prior.mean / prior.var_diag)
    weights = model.woodbury * model.params.normalized_variance * np.exp(log_c)
    return GaussianMixture(weights, means, np.broadcast_to(var_p, means.shape))


def f_density(
    model: WarpedGpModel | None, prior: DiagGaussian, x: np.ndarray
) -> float | np.ndarray:
    """|m̃(x)|·π(x); π(x) when there is no data yet."""
    prior_density = normal_pdf(x, prior)
    if not _has_data(model):
        return prior_density
    return np.abs(predict_warped_mean(model, x)) * prior_density


def _af_pairs(model: WarpedGpModel, prior: DiagGaussian) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Upper-triangle pair terms of C̃(x, x)π(x) (symmetric pairs merged).

    Returns:
        (weights of −Ω_ij components, means (P, d), shared variance (d,))
    """
    w_diag = model.params.w_diag
    v = model.params.normalized_variance
    upper_i, upper_j = np.triu_indices(model.n)
    multiplicity = np.where(upper_i == upper_j, 1.0, 2.0)
    log_pair = pair_log_matrix(model, prior)[upper_i, upper_j]
    weights = -(v**2) * model.inv_kernel[upper_i, upper_j] * multiplicity * np.exp(log_pair)
    var_f = 1.0 / (2.0 / w_diag + 1.0 / prior.var_diag)
    centres = 0.5 * (model.X[upper_i] + model.X[upper_j])
    means = var_f * (2.0 * centres / w_diag + prior.mean / prior.var_diag)
    return weights, means, var_f


def af_normalizer(model: WarpedGpModel | None, prior: DiagGaussian) -> float:
    """Z_A = ∫ C̃(x, x)π(x) dx = v′ − v² Σ_ij Ω_ij E_ij."""
    if not _has_data(model):
        return 1.0
    v = model.params.normalized_variance
    pair = np.exp(pair_log_matrix(model, prior))
    return float(model.params.variance - v**2 * np.sum(model.inv_kernel * pair))


def af_signed_mixture(model: WarpedGpModel, prior: DiagGaussian) -> tuple[GaussianMixture, float]:
    """The exact acquisition density p_A = C̃(x, x)π(x)/Z_A as a signed mixture.

    Component 0 is the prior with weight v′/Z_A.

    Returns:
        (normalised signed mixture, Z_A)
    """
    normalizer = af_normalizer(model, prior)
    weights, means, var_f = _af_pairs(model, prior)
    mixture = GaussianMixture(
        np.concatenate([[model.params.variance], weights]) / normalizer,
        np.vstack([prior.mean[None, :], means]),
        np.vstack([prior.var_diag[None, :], np.broadcast_to(var_f, means.shape)]),
    )
    return mixture, normalizer


def af_density(
    model: WarpedGpModel | None, prior: DiagGaussian, x: np.ndarray
) -> float | np.ndarray:
    """p_A(x) = C̃(x, x)π(x)/Z_A evaluated pointwise; π(x) with no data."""
    prior_density = normal_pdf(x, prior)
    if not _has_data(model):
        return prior_density
    normalizer = af_normalizer(model, prior)
    if normalizer <= 0:
        return prior_density
    _, var = predict_warped(model, x)
    return var * prior_density / normalizer


def af_mixture_build(
    model: WarpedGpModel | None, prior: DiagGaussian, n_samples: int
) -> GaussianMixture:
    """Sparse nonnegative mixture covering the acquisition density.

    Keeps the prior term and the pair terms with Ω_ij < 0, normalises, drops
    components lighter than 1/n_samples and renormalises.

    Args:
        model: Fitted model, or None before any data.
        prior: The prior.
        n_samples: Sample size N setting the pruning threshold.

    Returns:
        A normalised nonnegative mixture; the prior if nothing survives.
    """
    fallback = GaussianMixture.single(prior)
    if not _has_data(model):
        return fallback
    weights, means, var_f = _af_pairs(model, prior)
    positive = weights > 0
    mixture = GaussianMixture(
        np.concatenate([[model.params.variance], weights[positive]]),
        np.vstack([prior.mean[None, :], means[positive]]),
        np.vstack(
            [prior.var_diag[None, :], np.broadcast_to(var_f, (int(positive.sum()), prior.dim))]
        ),
    ).normalized()
    keep = mixture.weights >= 1.0 / n_samples
    if not np.any(keep):
        logger.warning("Every acquisition mixture component was pruned; using the prior")
        return fallback
    sparse = GaussianMixture(
        mixture.weights[keep], mixture.means[keep], mixture.variances[keep]
    ).normalized()
    logger.debug(
        f"Acquisition mixture: {sparse.n_components} of {weights.shape[0] + 1} component(s) kept"
    )
    return sparse


@dataclass(frozen=True)
class SmcDraw:
    """Result of one reweight/resample pass.

    Attributes:
        points: Resampled points (empty when every weight was zero).
        normalizer: Mean importance weight, an estimate of ∫ target.
        accepted: Number of candidates with positive weight.
    """

    points: np.ndarray
    normalizer: float
    accepted: int


def smc_resample(
    candidates: np.ndarray,
    target: np.ndarray,
    proposal: np.ndarray,
    count: int,
    rng: np.random.Generator,
) -> SmcDraw:
    """Weight candidates by target/proposal and resample `count` of them.

    Args:
        candidates: Points drawn from the proposal (K, d).
        target: Unnormalised target density at the candidates (negative values clip to 0).
        proposal: Normalised proposal density at the candidates.
        count: Number of points to resample.
        rng: Random generator.

    Returns:
        The resampled draw.
    """
    target = np.maximum(np.asarray(target, dtype=float), 0.0)
    proposal = np.asarray(proposal, dtype=float)
    weights = np.divide(target, proposal, out=np.zeros_like(target), where=proposal > 0)
    total = float(weights.sum())
    accepted = int(np.count_nonzero(weights))
    if total <= 0 or not np.isfinite(total):
        return SmcDraw(np.empty((0, candidates.shape[1])), 0.0, 0)
    index = rng.choice(candidates.shape[0], size=count, p=weights / total)
    return SmcDraw(candidates[index], total / candidates.shape[0], accepted)


def smc_sample_af(
    model: WarpedGpModel | None,
    prior: DiagGaussian,
    count: int,
    supersample_ratio: int,
    rng: np.random.Generator,
    sparse: GaussianMixture | None = None,
) -> np.ndarray:
    """Sample the acquisition density p_A by SMC over its sparse mixture.

    Args:
        model: Fitted model, or None before any data.
        prior: The prior.
        count: Number of points to return.
        supersample_ratio: Candidates drawn per returned point.
        rng: Random generator.
        sparse: Prebuilt sparse mixture; built with N = count·ratio if None.

    Returns:
        Points of shape (count, d).
    """
    if count <= 0:
        return np.empty((0, prior.dim))
    if not _has_data(model):
        return mixture_sample(GaussianMixture.single(prior), count, rng)
    if sparse is None:
        sparse = af_mixture_build(model, prior, count * supersample_ratio)
    candidates = mixture_sample(sparse, count * supersample_ratio, rng)
    _, var = predict_warped(model, candidates)
    draw = smc_resample(
        candidates, var * normal_pdf(candidates, prior), mixture_density(sparse, candidates), count, rng
    )
    logger.debug(f"Acquisition SMC accepted {draw.accepted} of {candidates.shape[0]} candidate(s)")
    if draw.points.shape[0] == 0:
        logger.warning("Acquisition SMC weights are all zero; falling back to prior draws")
        return mixture_sample(GaussianMixture.single(prior), count, rng)
    return draw.points


@dataclass(frozen=True)
class FDistribution:
    """The normalised target f(x) = |m̃(x)|π(x)/Z_f, or the prior as fallback."""

    model: WarpedGpModel | None
    prior: DiagGaussian
    normalizer: float

    @property
    def is_prior(self) -> bool:
        """True when f degenerated to the prior."""
        return not _has_data(self.model) or self.normalizer <= 0

    def density(self, x: np.ndarray) -> float | np.ndarray:
        """Normalised density of f."""
        if self.is_prior:
            return normal_pdf(x, self.prior)
        return f_density(self.model, self.prior, x) / self.normalizer


def smc_sample_f(
    model: WarpedGpModel | None,
    prior: DiagGaussian,
    count: int,
    supersample_ratio: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, FDistribution]:
    """Sample f(x) ∝ |m̃(x)|π(x) by SMC over the absolute-weight mixture of m̃π.

    The mean importance weight estimates Z_f, which normalises f.

    Returns:
        (points (count, d), the normalised f)
    """
    prior_mixture = GaussianMixture.single(prior)
    if not _has_data(model):
        return mixture_sample(prior_mixture, count, rng), FDistribution(None, prior, 1.0)
    if count <= 0:
        # Nothing to draw; Z_f is left for the caller to estimate.
        return np.empty((0, prior.dim)), FDistribution(model, prior, 0.0)
    signed = f_mixture(model, prior)
    if float(np.abs(signed.weights).sum()) <= 0:
        logger.warning("Warped GP mean is identically zero; f falls back to the prior")
        return mixture_sample(prior_mixture, count, rng), FDistribution(None, prior, 1.0)
    envelope = GaussianMixture(np.abs(signed.weights), signed.means, signed.variances).normalized()
    n_candidates = max(count, 1) * supersample_ratio
    candidates = mixture_sample(envelope, n_candidates, rng)
    # m̃π is the signed mixture itself, so target and envelope share components.
    both = mixture_densities(
        signed.means,
        signed.variances,
        np.column_stack([signed.weights, envelope.weights]),
        candidates,
    )
    draw = smc_resample(candidates, np.abs(both[:, 0]), both[:, 1], count, rng)
    if draw.normalizer <= 0:
        logger.warning("f-sampler weights are all zero; falling back to prior draws")
        return mixture_sample(prior_mixture, count, rng), FDistribution(None, prior, 1.0)
    logger.debug(f"f-sampler accepted {draw.accepted} of {n_candidates} candidate(s)")
    return draw.points, FDistribution(model, prior, draw.normalizer)


def igb_mixture(model: WarpedGpModel | None, prior: DiagGaussian) -> GaussianMixture:
    """Σ_{y_i > 0} 𝒩(x; X_i, W) with uniform weights; the prior if no y_i > 0."""
    if not _has_data(model):
        return GaussianMixture.single(prior)
    positive = model.y > 0
    if not np.any(positive):
        return GaussianMixture.single(prior)
    count = int(positive.sum())
    return GaussianMixture(
        np.full(count, 1.0 / count),
        model.X[positive],
        np.broadcast_to(model.params.w_diag, (count, model.dim)),
    )


def propose(
    model: WarpedGpModel | None,
    prior: DiagGaussian,
    cfg: ProposalConfig,
    rng: np.random.Generator,
    sparse: GaussianMixture | None = None,
) -> WeightedPointSet:
    """Draw N points from g and weight them by f/g.

    ⌊(1 − r)N⌋ points come from the f-sampler and the rest from the
    acquisition sampler (IVR, UB) or the IGB mixture. g is the density of
    that realised split, so every weight is 1 at r = 0.

    Args:
        model: Fitted model, or None before any data.
        prior: The prior.
        cfg: Proposal configuration.
        rng: Random generator.
        sparse: Prebuilt sparse acquisition mixture.

    Returns:
        The importance-weighted sample.
    """
    total = cfg.n_samples
    n_f = int(np.floor((1.0 - cfg.r) * total))
    n_a = total - n_f

    f_points, f_dist = smc_sample_f(model, prior, n_f, cfg.supersample_ratio, rng)
    if cfg.kind is ProposalKind.IGB:
        igb = igb_mixture(model, prior)
        a_points = mixture_sample(igb, n_a, rng) if n_a else np.empty((0, prior.dim))

        def a_density(x: np.ndarray) -> np.ndarray:
            return mixture_density(igb, x)
    else:
        if sparse is None and _has_data(model):
            sparse = af_mixture_build(model, prior, total)
        a_points = smc_sample_af(model, prior, n_a, cfg.supersample_ratio, rng, sparse)

        def a_density(x: np.ndarray) -> np.ndarray:
            return af_density(model, prior, x)

    points = np.vstack([f_points, a_points])
    if n_f == 0 and _has_data(model):
        # Z_f was not estimated by the f-sampler; estimate it against q_A.
        a_values = np.asarray(a_density(points))
        raw = np.divide(
            np.asarray(f_density(model, prior, points)),
            a_values,
            out=np.zeros(points.shape[0]),
            where=a_values > 0,
        )
        mean_raw = float(raw.mean())
        if mean_raw <= 0:
            logger.warning("f vanishes on every uncertainty sample; weighting against the prior")
            f_dist = FDistribution(None, prior, 1.0)
        else:
            return WeightedPointSet(points, raw / mean_raw)

    f_values = np.asarray(f_dist.density(points))
    g_values = (n_f / total) * f_values + (n_a / total) * np.asarray(a_density(points))
    weights = np.divide(f_values, g_values, out=np.zeros_like(f_values), where=g_values > 0)
    return WeightedPointSet(points, weights)
