"""Carathéodory reduction of weighted point sets.

A nonnegative measure on N points is reduced to at most c = k + 1 points
that keep its total mass and the integrals of k test functions. Points are
processed in blocks of about 2c: each block's null space of the constraint
matrix gives directions along which weights move until one hits zero.
"""

import logging
from collections.abc import Callable

import numpy as np
from scipy.linalg import lstsq, null_space

from batch_quadrature.exceptions import RecombinationError
from batch_quadrature.models import ReductionReport, WeightedPointSet

logger = logging.getLogger(__name__)

TestFunctions = Callable[[np.ndarray], np.ndarray]

PROPER_RETRIES = 5
PROPER_TOLERANCE = 1e-8
_TIE_TOLERANCE = 1e-12


def merge_duplicates(points: np.ndarray, weights: np.ndarray) -> WeightedPointSet:
    """Merge identical rows (summing weights) and drop zero weights."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    unique, inverse = np.unique(points, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=weights, minlength=unique.shape[0])
    keep = merged > 0
    if unique.shape[0] < points.shape[0]:
        logger.debug(f"Merged {points.shape[0] - unique.shape[0]} duplicate point(s)")
    return WeightedPointSet(unique[keep], merged[keep])


def _eliminate_block(
    constraints: np.ndarray,
    weights: np.ndarray,
    block: np.ndarray,
    residual: np.ndarray | None,
) -> None:
    """Zero out weights in `block` until at most rank-many stay positive.

    Updates `weights` in place.
    """
    directions = null_space(constraints[:, block])
    alive = np.ones(block.shape[0], dtype=bool)
    for col in range(directions.shape[1]):
        v = directions[:, col]
        if np.max(np.abs(v[alive])) <= _TIE_TOLERANCE:
            continue
        if residual is not None:
            if residual[block] @ v < 0:
                v = -v
        elif not np.any(v[alive] > _TIE_TOLERANCE):
            v = -v
        movable = alive & (v > _TIE_TOLERANCE)
        if not np.any(movable):
            raise RecombinationError.singular_step(int(np.sum(weights > 0)))
        ratios = np.full(block.shape[0], np.inf)
        ratios[movable] = weights[block[movable]] / v[movable]
        t = float(ratios.min())
        if not np.isfinite(t):
            raise RecombinationError.singular_step(int(np.sum(weights > 0)))
        # Ties go to the lowest point index.
        tied = np.flatnonzero(ratios <= t * (1.0 + _TIE_TOLERANCE))
        local = tied[np.argmin(block[tied])]

        updated = weights[block] - t * v
        updated[~alive] = 0.0
        updated[local] = 0.0
        weights[block] = np.maximum(updated, 0.0)
        alive[local] = False

        # Keep later directions in the null space and zero at the eliminated point.
        later = directions[:, col + 1 :]
        later -= np.outer(v, later[local] / v[local])
        if not np.any(alive):
            break


def _reduce(
    constraints: np.ndarray,
    weights: np.ndarray,
    order: np.ndarray,
    residual: np.ndarray | None,
) -> np.ndarray:
    """Run block elimination over points in `order`; returns the new weights."""
    weights = weights.copy()
    n_constraints = constraints.shape[0]
    block_size = 2 * n_constraints
    active = [int(i) for i in order if weights[i] > 0]
    while len(active) > n_constraints:
        block = np.asarray(active[:block_size])
        _eliminate_block(constraints, weights, block, residual)
        survivors = [int(i) for i in block if weights[i] > 0]
        if len(survivors) == block.shape[0]:
            raise RecombinationError.singular_step(len(active))
        active = survivors + active[block_size:]
    return weights


def _refine(constraints: np.ndarray, target: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Least-squares polish of the surviving weights, kept only if all stay positive."""
    support = np.flatnonzero(weights > 0)
    solution, *_ = lstsq(constraints[:, support], target)
    if np.all(solution > 0):
        before = np.max(np.abs(constraints[:, support] @ weights[support] - target))
        after = np.max(np.abs(constraints[:, support] @ solution - target))
        if after <= before:
            refined = np.zeros_like(weights)
            refined[support] = solution
            return refined
    return weights


def recombine(
    measure: WeightedPointSet,
    phi: TestFunctions,
    n: int,
    proper: bool = False,
    residual_sqrt: TestFunctions | None = None,
    rng: np.random.Generator | int | None = None,
) -> WeightedPointSet:
    """Reduce a nonnegative measure to at most n points.

    The result keeps the total mass and every test-function integral
    w·φ_i(X), and its points are a subset of the input points.

    Args:
        measure: Input points and nonnegative weights (N ≥ n points).
        phi: Maps points (m, d) to test-function values (k, m), k ≤ n − 1.
        n: Maximum support size.
        proper: Also keep Σ w·k₁^½(x) from increasing.
        residual_sqrt: Maps points to k₁^½(x); required when proper is set.
        rng: Generator or seed for reordering when a proper retry is needed.

    Returns:
        The reduced measure.

    Raises:
        RecombinationError: If N < n or an elimination step is singular.
    """
    if len(measure) < n:
        raise RecombinationError.too_few_points(len(measure), n)
    if np.any(measure.weights < 0):
        raise RecombinationError.negative_weights()
    merged = merge_duplicates(measure.points, measure.weights)
    values = np.atleast_2d(np.asarray(phi(merged.points), dtype=float))
    constraints = np.vstack([np.ones((1, len(merged))), values])
    if len(merged) <= constraints.shape[0]:
        return merged

    target = constraints @ merged.weights
    residual = None
    if proper:
        if residual_sqrt is None:
            raise ValueError("proper recombination needs residual_sqrt")
        residual = np.asarray(residual_sqrt(merged.points), dtype=float)
    residual_in = None if residual is None else float(residual @ merged.weights)

    rng = np.random.default_rng(rng)
    order = np.arange(len(merged))
    weights = merged.weights
    for attempt in range(PROPER_RETRIES + 1):
        reduced = _reduce(constraints, merged.weights, order, residual)
        weights = _refine(constraints, target, reduced)
        if residual is None or residual_in is None:
            break
        if residual @ weights > residual @ reduced:
            weights = reduced
        if float(residual @ weights) <= residual_in + PROPER_TOLERANCE:
            break
        if attempt == PROPER_RETRIES:
            logger.warning(
                f"Proper recombination bound still violated after {PROPER_RETRIES} retries; "
                "accepting the last reduction"
            )
            break
        order = rng.permutation(len(merged))

    support = np.flatnonzero(weights > 0)
    logger.debug(f"Recombined {len(measure)} point(s) to {support.shape[0]}")
    return WeightedPointSet(merged.points[support], weights[support])


def verify_reduction(
    measure_in: WeightedPointSet,
    measure_out: WeightedPointSet,
    phi: TestFunctions,
    residual_sqrt: TestFunctions | None = None,
) -> ReductionReport:
    """Absolute moment and mass errors of a reduction."""
    moments_in = np.atleast_2d(phi(measure_in.points)) @ measure_in.weights
    moments_out = np.atleast_2d(phi(measure_out.points)) @ measure_out.weights
    moment_error = float(np.max(np.abs(moments_out - moments_in))) if moments_in.size else 0.0
    residual_in = residual_out = None
    if residual_sqrt is not None:
        residual_in = float(np.asarray(residual_sqrt(measure_in.points)) @ measure_in.weights)
        residual_out = float(np.asarray(residual_sqrt(measure_out.points)) @ measure_out.weights)
    return ReductionReport(
        max_moment_error=moment_error,
        mass_error=abs(measure_out.total_mass - measure_in.total_mass),
        support_size=len(measure_out),
        residual_in=residual_in,
        residual_out=residual_out,
    )
