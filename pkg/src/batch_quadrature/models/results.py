"""Result and record models produced by the engine and benchmarks."""

from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field

from batch_quadrature.models.config_models import EngineConfig
from batch_quadrature.models.kernels import RbfKernelParams


class EvidenceEstimate(BaseModel):
    """Posterior mean and variance of the evidence Z.

    `clipped` marks a variance that came out negative beyond round-off and
    was set to zero.
    """

    model_config = ConfigDict(frozen=True)

    mean: float
    variance: float = Field(ge=0.0)
    clipped: bool = False

    @property
    def std(self) -> float:
        """Posterior standard deviation of Z."""
        return math.sqrt(self.variance)


class TraceRecord(BaseModel):
    """One row of a convergence trace.

    `overhead_ms` is wall-clock time spent outside the likelihood callable.
    """

    model_config = ConfigDict(frozen=True)

    iteration: int = Field(ge=0)
    evaluations: int = Field(ge=0)
    overhead_ms: float = Field(ge=0.0)
    evidence_mean: float
    evidence_variance: float = Field(ge=0.0)
    mae: float | None = None
    kl: float | None = None


class ReductionReport(BaseModel):
    """Exact error metrics of a recombination."""

    model_config = ConfigDict(frozen=True)

    max_moment_error: float
    mass_error: float
    support_size: int
    residual_in: float | None = None
    residual_out: float | None = None


class HyperoptResult(BaseModel):
    """Outcome of a type-II maximum likelihood search."""

    model_config = ConfigDict(frozen=True)

    params: RbfKernelParams
    objective: float
    failed: bool = False


class Metrics(BaseModel):
    """Benchmark metrics; None marks a metric without ground truth."""

    mae: float | None = None
    kl: float | None = None
    conditional_rmse: float | None = None


class Checkpoint(BaseModel):
    """Everything needed to resume a run."""

    X: list[list[float]]
    y: list[float]
    params: RbfKernelParams
    config: EngineConfig
    trace: list[TraceRecord]
    initial_record: TraceRecord | None = None
    iteration: int
    evaluations: int
    batch_evaluations: int = 0
    rng_state: str = Field(description="JSON of the numpy bit-generator state")


class RunSummary(BaseModel):
    """Aggregate of repeated benchmark runs."""

    problem: str
    dim: int
    seeds: list[int]
    final_evidence: list[float]
    final_mae: list[float | None]
    final_kl: list[float | None]
    median_mae: float | None = None
    iqr_mae: float | None = None
    median_kl: float | None = None
    iqr_kl: float | None = None
    z_true: float | None = None
    baseline_mae: float | None = None
