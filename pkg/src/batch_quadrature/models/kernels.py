"""Kernel hyperparameters and the kernel protocol."""

from __future__ import annotations

import math
from typing import Protocol

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class RbfKernelParams(BaseModel):
    """Squared-exponential kernel hyperparameters.

    K(a, b) = v′·exp(−½ Σ_k (a_k − b_k)² / l_k²) = v·𝒩(a; b, W) with
    W = diag(l²) and the normalised variance v = v′·√|2πW|.
    """

    model_config = ConfigDict(frozen=True)

    variance: float = Field(gt=0)
    lengthscales: tuple[float, ...] = Field(min_length=1)

    @field_validator("lengthscales")
    @classmethod
    def check_positive(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        """Reject nonpositive or non-finite lengthscales."""
        if any(not math.isfinite(l) or l <= 0 for l in value):
            raise ValueError(f"lengthscales must be finite and > 0, got {list(value)}")
        return value

    @classmethod
    def isotropic(cls, dim: int, lengthscale: float, variance: float) -> RbfKernelParams:
        """Create parameters with the same lengthscale in every dimension."""
        return cls(variance=variance, lengthscales=(float(lengthscale),) * dim)

    @classmethod
    def from_log_vector(cls, theta: np.ndarray) -> RbfKernelParams:
        """Inverse of `log_vector`."""
        theta = np.asarray(theta, dtype=float)
        return cls(
            variance=float(np.exp(theta[0])),
            lengthscales=tuple(float(v) for v in np.exp(theta[1:])),
        )

    @property
    def dim(self) -> int:
        """Input dimension."""
        return len(self.lengthscales)

    @property
    def w_diag(self) -> np.ndarray:
        """Diagonal of W (squared lengthscales)."""
        return np.asarray(self.lengthscales, dtype=float) ** 2

    @property
    def normalized_variance(self) -> float:
        """v = v′·√|2πW|."""
        return float(self.variance * np.prod(np.sqrt(2.0 * np.pi * self.w_diag)))

    def log_vector(self) -> np.ndarray:
        """(log v′, log l_1, …, log l_d), the optimisation coordinates."""
        return np.log(np.concatenate([[self.variance], np.asarray(self.lengthscales)]))


class Kernel(Protocol):
    """A symmetric positive semi-definite kernel on ℝ^d."""

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Gram matrix K(a_i, b_j) for point arrays a (m×d) and b (p×d)."""
        ...

    def diag(self, a: np.ndarray) -> np.ndarray:
        """K(a_i, a_i) for each row of a."""
        ...
