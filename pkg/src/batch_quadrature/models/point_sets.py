"""Weighted point sets (empirical measures)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from batch_quadrature.exceptions import DimensionMismatchError, InvalidDistributionError


@dataclass(frozen=True)
class WeightedPointSet:
    """Points X (N×d) with nonnegative, finite weights w (N)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if points.shape[0] != weights.shape[0]:
            raise DimensionMismatchError.for_shapes(
                points.shape[0], weights.shape[0], "weight count"
            )
        if not np.all(np.isfinite(weights)):
            raise InvalidDistributionError("Point weights must be finite")
        if np.any(weights < 0):
            raise InvalidDistributionError("Point weights must be nonnegative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        """Dimension of the points."""
        return int(self.points.shape[1])

    @property
    def total_mass(self) -> float:
        """Σ w."""
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """wᵀh for h evaluated at the points (last axis indexes points)."""
        return np.asarray(values) @ self.weights
