"""Synthetic likelihoods with known evidence under the prior 𝒩(0, 2I)."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from batch_quadrature.exceptions import GroundTruthUnavailableError, UnknownProblemError
from batch_quadrature.models import DiagGaussian, GaussianMixture
from batch_quadrature.services.gaussian_algebra import (
    as_points,
    mixture_density,
    mixture_sample,
    normal_pdf,
    product_with_gaussian,
)

logger = logging.getLogger(__name__)

PRIOR_VARIANCE = 2.0
BRANIN_FACTOR_Z = 0.955728
ACKLEY_Z_2D = 5.43478
OSCILLATORY_Z = 1.0
GAUSSMIX_Z = 1.0

# Rejection sampling box and slack on the grid maximum.
ENVELOPE_HALF_WIDTH = 6.0
ENVELOPE_SLACK = 1.05
_REJECTION_BATCH = 20_000
_REJECTION_MAX_ROUNDS = 1_000

Formula = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SyntheticProblem:
    """A benchmark integrand ℓ(x) with prior, envelope and ground truth.

    `formula` maps (m, d) points to (m,) likelihood values. `envelope` bounds
    ℓ from above and drives rejection sampling of the true posterior.
    `mixture` is set when ℓ is itself a Gaussian mixture, in which case the
    true posterior is sampled in closed form.
    """

    name: str
    dim: int
    prior: DiagGaussian
    formula: Formula
    z_true: float | None
    envelope: float
    mixture: GaussianMixture | None = None

    def __call__(self, x: np.ndarray) -> float:
        return float(eval_synthetic_likelihood(self, x))

    @property
    def has_ground_truth(self) -> bool:
        """Whether the evidence, and so the posterior density, is known."""
        return self.z_true is not None

    def posterior_density(self, x: np.ndarray) -> float | np.ndarray:
        """p(x) = ℓ(x)π(x)/Z.

        Raises:
            GroundTruthUnavailableError: If Z is unknown.
        """
        if self.z_true is None:
            raise GroundTruthUnavailableError.for_metric(self.name, "posterior density")
        values = eval_synthetic_likelihood(self, x) * normal_pdf(x, self.prior) / self.z_true
        return float(values) if np.ndim(values) == 0 else values

    def sample_posterior(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw from the true posterior ℓπ/Z."""
        if self.mixture is not None:
            return mixture_sample(_posterior_mixture(self.mixture, self.prior), count, rng)
        return _rejection_sample(self, count, rng)


def eval_synthetic_likelihood(problem: SyntheticProblem, x: np.ndarray) -> float | np.ndarray:
    """Evaluate ℓ at a point (d,) or points (m, d).

    Raises:
        DimensionMismatchError: If the points are not `problem.dim`-dimensional.
    """
    points, single = as_points(x, problem.dim)
    values = problem.formula(points)
    return float(values[0]) if single else values


def _rejection_sample(problem: SyntheticProblem, count: int, rng: np.random.Generator) -> np.ndarray:
    accepted: list[np.ndarray] = []
    total = 0
    for _ in range(_REJECTION_MAX_ROUNDS):
        if total >= count:
            break
        draws = problem.prior.mean + problem.prior.std_diag * rng.standard_normal(
            (_REJECTION_BATCH, problem.dim)
        )
        keep = rng.uniform(size=_REJECTION_BATCH) * problem.envelope < problem.formula(draws)
        accepted.append(draws[keep])
        total += int(keep.sum())
    if total < count:
        logger.warning(f"Rejection sampling for {problem.name} yielded {total} of {count} draws")
    return np.vstack(accepted)[:count]


def _posterior_mixture(likelihood: GaussianMixture, prior: DiagGaussian) -> GaussianMixture:
    log_scales = np.empty(likelihood.n_components)
    means = np.empty_like(likelihood.means)
    variances = np.empty_like(likelihood.variances)
    for k in range(likelihood.n_components):
        log_scale, mean, var = product_with_gaussian(
            likelihood.means[k : k + 1], likelihood.variances[k], prior
        )
        log_scales[k], means[k], variances[k] = log_scale[0], mean[0], var
    return GaussianMixture(likelihood.weights * np.exp(log_scales), means, variances).normalized()


def _branin_factor(x: np.ndarray) -> np.ndarray:
    return (np.sin(x) + 0.5 * np.cos(3.0 * x)) ** 2 / ((0.5 * x) ** 2 + 0.3)


def _grid_max(factor: Formula) -> float:
    grid = np.linspace(-ENVELOPE_HALF_WIDTH, ENVELOPE_HALF_WIDTH, 100_001)
    return float(np.max(factor(grid)))


def branin(dim: int = 2, seed: int = 0) -> SyntheticProblem:  # noqa: ARG001
    """Product-form Branin-Hoo; each factor integrates to 0.955728 under 𝒩(0, 2)."""
    return SyntheticProblem(
        name="branin",
        dim=dim,
        prior=DiagGaussian.isotropic(dim, 0.0, PRIOR_VARIANCE),
        formula=lambda x: np.prod(_branin_factor(x), axis=1),
        z_true=BRANIN_FACTOR_Z**dim,
        envelope=(ENVELOPE_SLACK * _grid_max(_branin_factor)) ** dim,
    )


def ackley(dim: int = 2, seed: int = 0) -> SyntheticProblem:  # noqa: ARG001
    """Ackley with a positive offset; ground truth is tabulated for d = 2 only."""

    def formula(x: np.ndarray) -> np.ndarray:
        return (
            -20.0 * np.exp(-0.2 * np.sqrt(np.mean(x**2, axis=1)))
            + np.exp(np.mean(np.cos(2.0 * np.pi * x), axis=1))
            + 20.0
        )

    return SyntheticProblem(
        name="ackley",
        dim=dim,
        prior=DiagGaussian.isotropic(dim, 0.0, PRIOR_VARIANCE),
        formula=formula,
        z_true=ACKLEY_Z_2D if dim == 2 else None,
        envelope=20.0 + np.e,
    )


def oscillatory(dim: int = 2, seed: int = 0) -> SyntheticProblem:  # noqa: ARG001
    """Genz oscillatory: cos(2π + 5Σx) + 1."""
    return SyntheticProblem(
        name="oscillatory",
        dim=dim,
        prior=DiagGaussian.isotropic(dim, 0.0, PRIOR_VARIANCE),
        formula=lambda x: np.cos(2.0 * np.pi + 5.0 * np.sum(x, axis=1)) + 1.0,
        z_true=OSCILLATORY_Z,
        envelope=2.0,
    )


def gaussian_mixture_likelihood(dim: int, rng: np.random.Generator) -> GaussianMixture:
    """Random mixture whose integral against 𝒩(0, 2I) is exactly one.

    10 to 15 isotropic components, variances U[1, 4], means U[-3, 3]^d and
    uniform raw weights rescaled by Σ w_k 𝒩(μ_k; 0, Σ_k + 2I).
    """
    count = int(rng.integers(10, 16))
    variances = np.repeat(rng.uniform(1.0, 4.0, size=(count, 1)), dim, axis=1)
    means = rng.uniform(-3.0, 3.0, size=(count, dim))
    weights = rng.uniform(size=count)
    prior = DiagGaussian.isotropic(dim, 0.0, PRIOR_VARIANCE)
    mass = np.array(
        [
            normal_pdf(means[k], DiagGaussian(prior.mean, variances[k] + prior.var_diag))
            for k in range(count)
        ]
    )
    return GaussianMixture(weights / float(weights @ mass), means, variances)


def gaussmix(dim: int = 2, seed: int = 0) -> SyntheticProblem:
    """Seed-generated Gaussian-mixture likelihood with Z = 1."""
    mixture = gaussian_mixture_likelihood(dim, np.random.default_rng(seed))
    peak = float(np.sum(mixture.weights * np.prod(2.0 * np.pi * mixture.variances, axis=1) ** -0.5))
    return SyntheticProblem(
        name="gaussmix",
        dim=dim,
        prior=DiagGaussian.isotropic(dim, 0.0, PRIOR_VARIANCE),
        formula=lambda x: np.atleast_1d(mixture_density(mixture, x)),
        z_true=GAUSSMIX_Z,
        envelope=peak,
        mixture=mixture,
    )


PROBLEMS: dict[str, Callable[..., SyntheticProblem]] = {
    "branin": branin,
    "ackley": ackley,
    "oscillatory": oscillatory,
    "gaussmix": gaussmix,
}


def list_problems() -> list[str]:
    """Names of the registered problems."""
    return list(PROBLEMS)


def get_problem(name: str, dim: int = 2, seed: int = 0) -> SyntheticProblem:
    """Build a registered problem.

    Args:
        name: Registry key.
        dim: Input dimension.
        seed: Generator seed for randomly constructed problems.

    Raises:
        UnknownProblemError: If `name` is not registered.
    """
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise UnknownProblemError.for_name(name, list_problems()) from None
    problem = factory(dim=dim, seed=seed)
    if problem.z_true is None:
        logger.warning(f"No ground-truth evidence for {name} in {dim} dimension(s)")
    return problem
