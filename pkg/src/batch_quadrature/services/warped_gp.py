"""Square-root warped GP: fitting, prediction and type-II maximum likelihood.

The likelihood is modelled as ℓ(x) = α + ½ℓ̃(x)² with a zero-mean GP on ℓ̃
and a squared-exponential kernel. Moments of ℓ are linearised around the
GP mean of ℓ̃.
"""

import logging

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from batch_quadrature.exceptions import FactorizationError, QuadratureError
from batch_quadrature.models import HyperoptResult, RbfKernelParams, WarpedGpModel
from batch_quadrature.services.gaussian_algebra import LOG_2PI, as_points

logger = logging.getLogger(__name__)

# Lengthscale bounds as multiples of the per-dimension input scale.
LENGTHSCALE_BOUNDS = (1e-2, 1e2)
VARIANCE_BOUNDS = (1e-6, 1e6)
DEFAULT_ALPHA_FACTOR = 0.8
DUPLICATE_TOLERANCE = 1e-10

# Jitter ladder relative to v′.
_JITTER_LADDER = 10.0 ** np.arange(-8, -1)
# Upper bound on (observations × query points) per prediction block.
_PREDICT_CHUNK_ENTRIES = 4_000_000


class RbfKernel:
    """The prior kernel K as a callable."""

    def __init__(self, params: RbfKernelParams) -> None:
        self.params = params

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return kernel_eval(self.params, a, b)

    def diag(self, a: np.ndarray) -> np.ndarray:
        points, _ = as_points(a, self.params.dim)
        return np.full(points.shape[0], self.params.variance)


class PosteriorCovariance:
    """The warped posterior covariance C̃(a, b) = K(a, b) − K(a, X)ΩK(X, b)."""

    def __init__(self, model: WarpedGpModel) -> None:
        self.model = model

    def _whitened(self, a: np.ndarray) -> np.ndarray:
        k = kernel_eval(self.model.params, self.model.X, a)
        return solve_triangular(self.model.chol, k, lower=True, check_finite=False)

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        va = self._whitened(a)
        vb = va if b is a else self._whitened(b)
        return kernel_eval(self.model.params, a, b) - va.T @ vb

    def diag(self, a: np.ndarray) -> np.ndarray:
        points, _ = as_points(a, self.model.dim)
        _, var = predict_warped(self.model, points)
        return np.atleast_1d(var)


def kernel_eval(params: RbfKernelParams, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = v′·exp(−½ Σ_k (A_ik − B_jk)² / l_k²) = v·𝒩(A_i; B_j, W).

    Args:
        params: Kernel hyperparameters.
        A: Points (m, d) or a single point.
        B: Points (p, d) or a single point.

    Returns:
        Array of shape (m, p).
    """
    A, _ = as_points(A, params.dim)
    B, _ = as_points(B, params.dim)
    lengthscales = np.asarray(params.lengthscales)
    scaled = cdist(A / lengthscales, B / lengthscales, "sqeuclidean")
    return params.variance * np.exp(-0.5 * scaled)


def deduplicate(
    X: np.ndarray, y: np.ndarray, tolerance: float = DUPLICATE_TOLERANCE
) -> tuple[np.ndarray, np.ndarray]:
    """Drop rows of X within `tolerance` of an earlier row, keeping the first."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if X.shape[0] < 2:
        return X, y
    distances = cdist(X, X)
    keep = np.ones(X.shape[0], dtype=bool)
    for i in range(1, X.shape[0]):
        if np.any(distances[i, :i][keep[:i]] <= tolerance):
            keep[i] = False
    dropped = int(np.sum(~keep))
    if dropped:
        logger.debug(f"Dropped {dropped} duplicate observation(s)")
    return X[keep], y[keep]


def robust_cholesky(K: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K + jitter·I, escalating jitter on failure.

    Jitter starts at 1e-8·scale and grows ×10 up to 1e-2·scale.

    Returns:
        (L, jitter)

    Raises:
        FactorizationError: If every rung of the ladder fails.
    """
    eye = np.eye(K.shape[0])
    for rung, relative in enumerate(_JITTER_LADDER):
        jitter = float(relative * scale)
        try:
            chol = cholesky(K + jitter * eye, lower=True, check_finite=False)
        except LinAlgError:
            continue
        if rung > 0:
            logger.warning(f"Kernel matrix needed jitter {jitter:.3g} to factorize")
        return chol, jitter
    raise FactorizationError.after_jitter(
        float(np.linalg.cond(K)), float(_JITTER_LADDER[-1] * scale)
    )


def fit(
    X: np.ndarray,
    y: np.ndarray,
    params: RbfKernelParams,
    alpha: float | None = None,
    alpha_factor: float = DEFAULT_ALPHA_FACTOR,
) -> WarpedGpModel:
    """Fit the warped GP to likelihood observations.

    Args:
        X: Observation points (n, d); near-duplicate rows are dropped.
        y: Likelihood values (n).
        params: Kernel hyperparameters.
        alpha: Explicit warp offset. Defaults to alpha_factor·min(y).
        alpha_factor: Multiplier of min(y) used when alpha is None.

    Returns:
        The fitted model.

    Raises:
        FactorizationError: If K_XX cannot be factorized.
    """
    X, y = deduplicate(X, y)
    if alpha is None:
        alpha = alpha_factor * float(np.min(y))
    y_warped = np.sqrt(2.0 * np.maximum(y - alpha, 0.0))
    K = kernel_eval(params, X, X)
    chol, jitter = robust_cholesky(K, params.variance)
    woodbury = cho_solve((chol, True), y_warped, check_finite=False)
    inv_kernel = cho_solve((chol, True), np.eye(X.shape[0]), check_finite=False)
    inv_kernel = 0.5 * (inv_kernel + inv_kernel.T)
    return WarpedGpModel(
        X=X,
        y=y,
        alpha=float(alpha),
        y_warped=y_warped,
        woodbury=woodbury,
        inv_kernel=inv_kernel,
        chol=chol,
        params=params,
        jitter=jitter,
    )


def refit(model: WarpedGpModel, params: RbfKernelParams) -> WarpedGpModel:
    """Fit the same observations with new hyperparameters."""
    return fit(model.X, model.y, params, alpha=model.alpha)


def predict_warped(
    model: WarpedGpModel, x: np.ndarray
) -> tuple[float | np.ndarray, float | np.ndarray]:
    """GP posterior of ℓ̃: mean m̃ = K(x, X)ω and variance C̃(x, x) ≥ 0.

    Args:
        model: Fitted model.
        x: A point (d,) or points (m, d).

    Returns:
        (m̃, C̃) as floats for a single point, otherwise arrays of shape (m,).
    """
    points, single = as_points(x, model.dim)
    mean = np.empty(points.shape[0])
    var = np.empty(points.shape[0])
    chunk = max(1, _PREDICT_CHUNK_ENTRIES // max(model.n, 1))
    for start in range(0, points.shape[0], chunk):
        k = kernel_eval(model.params, model.X, points[start : start + chunk])
        v = solve_triangular(model.chol, k, lower=True, check_finite=False)
        mean[start : start + chunk] = k.T @ model.woodbury
        var[start : start + chunk] = model.params.variance - np.sum(v**2, axis=0)
    var = np.maximum(var, 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def predict_warped_mean(model: WarpedGpModel, x: np.ndarray) -> float | np.ndarray:
    """m̃ = K(x, X)ω alone, skipping the variance solve."""
    points, single = as_points(x, model.dim)
    mean = np.empty(points.shape[0])
    chunk = max(1, _PREDICT_CHUNK_ENTRIES // max(model.n, 1))
    for start in range(0, points.shape[0], chunk):
        k = kernel_eval(model.params, points[start : start + chunk], model.X)
        mean[start : start + chunk] = k @ model.woodbury
    return float(mean[0]) if single else mean


def predict_likelihood(
    model: WarpedGpModel, x: np.ndarray
) -> tuple[float | np.ndarray, float | np.ndarray]:
    """Linearised moments of ℓ: m^L = α + ½m̃² and C^L = m̃²·C̃.

    Args:
        model: Fitted model.
        x: A point (d,) or points (m, d).

    Returns:
        (m^L, C^L) as floats for a single point, otherwise arrays.
    """
    mean, var = predict_warped(model, x)
    mean = np.asarray(mean)
    m_l = model.alpha + 0.5 * mean**2
    c_l = mean**2 * np.asarray(var)
    if m_l.ndim == 0:
        return float(m_l), float(c_l)
    return m_l, c_l


def log_marginal_likelihood(
    X: np.ndarray, y_warped: np.ndarray, params: RbfKernelParams
) -> float:
    """log 𝒩(ỹ; 0, K_XX + jitter·I).

    Raises:
        FactorizationError: If K_XX cannot be factorized.
    """
    value, _ = log_marginal_likelihood_and_gradient(X, y_warped, params)
    return value


def log_marginal_likelihood_and_gradient(
    X: np.ndarray, y_warped: np.ndarray, params: RbfKernelParams
) -> tuple[float, np.ndarray]:
    """Log marginal likelihood and its gradient w.r.t. (log v′, log l_1, …, log l_d).

    The jitter is proportional to v′, so ∂K/∂log v′ includes it.

    Raises:
        FactorizationError: If K_XX cannot be factorized.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y_warped = np.asarray(y_warped, dtype=float)
    n = X.shape[0]
    K = kernel_eval(params, X, X)
    chol, jitter = robust_cholesky(K, params.variance)
    alpha = cho_solve((chol, True), y_warped, check_finite=False)
    value = (
        -0.5 * float(y_warped @ alpha) - float(np.sum(np.log(np.diag(chol)))) - 0.5 * n * LOG_2PI
    )

    inner = np.outer(alpha, alpha) - cho_solve((chol, True), np.eye(n), check_finite=False)
    gradient = np.empty(params.dim + 1)
    gradient[0] = 0.5 * np.sum(inner * (K + jitter * np.eye(n)))
    w_diag = params.w_diag
    for k in range(params.dim):
        dK = K * (X[:, k, None] - X[None, :, k]) ** 2 / w_diag[k]
        gradient[k + 1] = 0.5 * np.sum(inner * dK)
    return value, gradient


def lengthscale_bounds(
    dim: int, scale: np.ndarray | float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension (lower, upper) lengthscale bounds.

    Args:
        dim: Input dimension.
        scale: Input scale per dimension, typically the prior standard
            deviations; 1 when None.

    Returns:
        LENGTHSCALE_BOUNDS multiplied by the scale, each of shape (dim,).
    """
    scale = np.broadcast_to(np.asarray(1.0 if scale is None else scale, dtype=float), (dim,))
    return LENGTHSCALE_BOUNDS[0] * scale, LENGTHSCALE_BOUNDS[1] * scale


def on_lengthscale_bound(
    params: RbfKernelParams, scale: np.ndarray | float | None = None, rtol: float = 1e-6
) -> bool:
    """True if any lengthscale sits on (or beyond) its bound."""
    lower, upper = lengthscale_bounds(params.dim, scale)
    lengthscales = np.asarray(params.lengthscales)
    low = np.any(lengthscales <= lower * (1.0 + rtol))
    return bool(low or np.any(lengthscales >= upper * (1.0 - rtol)))


def _log_bounds(dim: int, scale: np.ndarray | float | None) -> list[tuple[float, float]]:
    lower, upper = lengthscale_bounds(dim, scale)
    return [tuple(np.log(VARIANCE_BOUNDS))] + list(
        zip(np.log(lower).tolist(), np.log(upper).tolist(), strict=True)
    )


def optimize_hypers(
    model: WarpedGpModel,
    restarts: int = 3,
    rng: np.random.Generator | int | None = None,
    max_evals: int = 200,
    scale: np.ndarray | float | None = None,
    anchor: RbfKernelParams | None = None,
) -> HyperoptResult:
    """Type-II maximum likelihood of the kernel hyperparameters.

    The first restart starts from the current parameters, the anchor (when
    given) adds one more start, and the rest start from log-uniform
    perturbations of the current parameters within ×/÷10. The best optimum
    over all starts wins; it never has a lower log marginal likelihood than
    the input parameters.

    Args:
        model: Fitted model whose observations define the objective.
        restarts: Number of perturbed-or-current L-BFGS-B starts; 0 returns
            the input unchanged.
        rng: Generator or seed for restart initialisation.
        max_evals: Objective evaluation cap shared across starts.
        scale: Input scale that the lengthscale bounds are relative to.
        anchor: Extra fixed start, e.g. the run's initial parameters. Small
            lengthscales sit on a flat plateau of the objective that local
            search started there cannot leave.

    Returns:
        The best parameters, their objective and whether every start failed.
    """
    current = model.params
    try:
        best_value = log_marginal_likelihood(model.X, model.y_warped, current)
    except FactorizationError:
        best_value = -np.inf
    if restarts <= 0 or model.n < 2:
        return HyperoptResult(params=current, objective=best_value)

    rng = np.random.default_rng(rng)
    bounds = _log_bounds(current.dim, scale)
    lower, upper = np.array(bounds).T
    theta0 = np.clip(current.log_vector(), lower, upper)
    starts = [theta0]
    if anchor is not None:
        starts.append(np.clip(anchor.log_vector(), lower, upper))
    starts += [
        np.clip(theta0 + rng.uniform(-np.log(10.0), np.log(10.0), theta0.shape), lower, upper)
        for _ in range(restarts - 1)
    ]

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        params = RbfKernelParams.from_log_vector(theta)
        try:
            value, gradient = log_marginal_likelihood_and_gradient(
                model.X, model.y_warped, params
            )
        except FactorizationError:
            return np.inf, np.zeros_like(theta)
        return -value, -gradient

    best = current
    failures = 0
    for start in starts:
        try:
            result = minimize(
                objective,
                start,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxfun": max(1, max_evals // len(starts))},
            )
        except (QuadratureError, ValueError, LinAlgError) as e:
            logger.debug(f"Hyperparameter restart failed: {e}")
            failures += 1
            continue
        if not np.isfinite(result.fun):
            failures += 1
            continue
        if -result.fun > best_value:
            best_value = float(-result.fun)
            best = RbfKernelParams.from_log_vector(result.x)

    failed = failures == len(starts)
    if failed:
        logger.warning("Every hyperparameter start failed; keeping current parameters")
    else:
        logger.debug(
            f"Hyperparameters: variance={best.variance:.4g}, "
            f"lengthscales={[round(l, 4) for l in best.lengthscales]}, lml={best_value:.4g}"
        )
    return HyperoptResult(params=best, objective=best_value, failed=failed)
