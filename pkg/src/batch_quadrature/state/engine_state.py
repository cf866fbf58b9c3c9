"""Mutable state of a quadrature run."""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from batch_quadrature.models import (
    DiagGaussian,
    EngineConfig,
    EvidenceEstimate,
    Kernel,
    Metrics,
    TraceRecord,
    WarpedGpModel,
)
from batch_quadrature.state.counters import EvaluationCounter

Likelihood = Callable[[np.ndarray], float]
KernelFactory = Callable[[WarpedGpModel], Kernel]


@dataclass
class EngineState:
    """Everything a run carries from one iteration to the next.

    `batch_evaluations` counts the likelihood calls charged against the
    budget; the initial design is not among them.
    """

    prior: DiagGaussian
    likelihood: Likelihood
    config: EngineConfig
    model: WarpedGpModel
    rng: np.random.Generator
    estimate: EvidenceEstimate
    kernel_factory: KernelFactory
    counter: EvaluationCounter = field(default_factory=EvaluationCounter)
    iteration: int = 0
    batch_evaluations: int = 0
    trace: list[TraceRecord] = field(default_factory=list)
    initial_record: TraceRecord | None = None
    metrics_hook: Callable[["EngineState"], Metrics | None] | None = None

    @property
    def evaluations(self) -> int:
        """Total likelihood calls including the initial design."""
        return self.counter.evaluations

    @property
    def observations(self) -> int:
        """Number of distinct observed points."""
        return self.model.n

    @property
    def budget_left(self) -> int:
        """Batch evaluations still allowed."""
        return max(self.config.max_evaluations - self.batch_evaluations, 0)

    def evidence(self) -> EvidenceEstimate:
        """Current evidence estimate."""
        return self.estimate
