"""Custom exceptions for the batch Bayesian quadrature engine."""

from collections.abc import Sequence

import numpy as np


class QuadratureError(Exception):
    """Base class for every error raised by the engine.

    Subclasses expose classmethod constructors so that the same failure is
    always reported with the same wording.
    """

    def __init__(self, message: str) -> None:
        """Initialize the exception.

        Args:
            message: The error message describing what's wrong.
        """
        self.message = message
        super().__init__(message)


class DimensionMismatchError(QuadratureError):
    """Raised when arrays that must share a dimension do not."""

    @classmethod
    def for_shapes(cls, expected: int, got: int, what: str) -> "DimensionMismatchError":
        """Create an error for a mismatched dimension."""
        return cls(f"Dimension mismatch for {what}: expected {expected}, got {got}")


class InvalidDistributionError(QuadratureError):
    """Raised when a Gaussian or mixture is malformed."""

    @classmethod
    def nonpositive_variance(cls, var_diag: np.ndarray) -> "InvalidDistributionError":
        """Create an error for a covariance diagonal with nonpositive entries."""
        return cls(f"All variance entries must be > 0, got {np.asarray(var_diag).tolist()}")

    @classmethod
    def negative_weights(cls, count: int) -> "InvalidDistributionError":
        """Create an error for sampling a signed mixture."""
        return cls(
            f"Cannot sample a mixture with {count} negative weight(s); "
            "sparsify the signed mixture into a nonnegative proposal first"
        )

    @classmethod
    def empty_mixture(cls) -> "InvalidDistributionError":
        """Create an error for a mixture with no positive mass."""
        return cls("Mixture has no component with positive weight")

    @classmethod
    def length_mismatch(cls, n_weights: int, n_components: int) -> "InvalidDistributionError":
        """Create an error for weights and components of different lengths."""
        return cls(
            f"Mixture has {n_weights} weight(s) but {n_components} component(s)"
        )


class FactorizationError(QuadratureError):
    """Raised when the kernel matrix cannot be factorized even with jitter."""

    def __init__(self, message: str, condition: float | None = None) -> None:
        """Initialize the exception.

        Args:
            message: The error message describing what's wrong.
            condition: Condition number estimate of the failing matrix.
        """
        self.condition = condition
        super().__init__(message)

    @classmethod
    def after_jitter(cls, condition: float, max_jitter: float) -> "FactorizationError":
        """Create an error for a Cholesky failure at the top of the jitter ladder."""
        return cls(
            f"Kernel matrix is not positive definite after jitter {max_jitter:.3g} "
            f"(condition estimate {condition:.3g})",
            condition=condition,
        )


class InvalidLikelihoodValueError(QuadratureError):
    """Raised when the likelihood returns NaN or negative infinity."""

    def __init__(self, message: str, point: Sequence[float] | None = None) -> None:
        """Initialize the exception.

        Args:
            message: The error message describing what's wrong.
            point: The query point that produced the value.
        """
        self.point = None if point is None else [float(v) for v in point]
        super().__init__(message)

    @classmethod
    def at_point(cls, point: Sequence[float], value: float) -> "InvalidLikelihoodValueError":
        """Create an error naming the offending point."""
        coords = ", ".join(f"{float(v):.6g}" for v in point)
        return cls(f"Likelihood returned {value} at point [{coords}]", point=point)


class EvidenceNotReadyError(QuadratureError):
    """Raised when a posterior is requested while E[Z|y] is not positive."""

    @classmethod
    def nonpositive(cls, evidence_mean: float) -> "EvidenceNotReadyError":
        """Create an error for a nonpositive evidence mean."""
        return cls(
            f"Posterior density requires a positive evidence mean, got {evidence_mean:.6g}"
        )


class DegenerateSliceError(QuadratureError):
    """Raised when conditioning on a slice that carries no posterior mass."""

    @classmethod
    def zero_mass(
        cls, fixed_dims: Sequence[int], fixed_vals: Sequence[float]
    ) -> "DegenerateSliceError":
        """Create an error for a conditioning slice with zero density."""
        return cls(
            f"Conditional posterior is undefined: the slice at dims {list(fixed_dims)} = "
            f"{[float(v) for v in fixed_vals]} has zero posterior mass"
        )


class NystromError(QuadratureError):
    """Raised when a Nyström basis cannot be built."""

    @classmethod
    def too_few_landmarks(cls, m: int, n_test: int) -> "NystromError":
        """Create an error for fewer landmarks than requested test functions."""
        return cls(f"Need at least {n_test} landmark(s) for {n_test} test function(s), got {m}")


class RecombinationError(QuadratureError):
    """Raised when a weighted point set cannot be reduced."""

    @classmethod
    def too_few_points(cls, count: int, n: int) -> "RecombinationError":
        """Create an error for an input smaller than the requested support."""
        return cls(f"Recombination needs at least {n} input point(s), got {count}")

    @classmethod
    def negative_weights(cls) -> "RecombinationError":
        """Create an error for a signed input measure."""
        return cls("Recombination input weights must be nonnegative")

    @classmethod
    def singular_step(cls, support: int) -> "RecombinationError":
        """Create an error for an elimination step that made no progress."""
        return cls(f"Elimination step is numerically singular at support size {support}")


class UnknownProblemError(QuadratureError):
    """Raised when a benchmark problem name is not registered."""

    @classmethod
    def for_name(cls, name: str, known: Sequence[str]) -> "UnknownProblemError":
        """Create an error listing the registered problems."""
        return cls(f"Unknown problem '{name}'. Registered problems: {', '.join(known)}")


class GroundTruthUnavailableError(QuadratureError):
    """Raised when a metric needs ground truth the problem does not have."""

    @classmethod
    def for_metric(cls, problem: str, metric: str) -> "GroundTruthUnavailableError":
        """Create an error for a metric without ground truth."""
        return cls(f"Metric '{metric}' is unavailable for problem '{problem}': no ground truth")


class CheckpointError(QuadratureError):
    """Raised when a checkpoint cannot be read back."""

    @classmethod
    def unreadable(cls, path: str, reason: str) -> "CheckpointError":
        """Create an error for a malformed or missing checkpoint file."""
        return cls(f"Cannot load checkpoint '{path}': {reason}")
