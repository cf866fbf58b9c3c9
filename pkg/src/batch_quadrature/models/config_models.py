"""Validated configuration models for samplers and the engine."""

from __future__ import annotations

import logging
import math
from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)


class ProposalKind(StrEnum):
    """Proposal distribution family used for subsampling."""

    IVR = "ivr"  # prior/f + uncertainty mixture
    IGB = "igb"  # vicinity of observations with y > 0
    UB = "ub"  # pure uncertainty sampling


class ProposalConfig(BaseModel):
    """Configuration of one proposal draw g(x) = (1 − r)·f(x) + r·A(x)."""

    model_config = ConfigDict(populate_by_name=True)

    kind: ProposalKind = ProposalKind.IVR
    r: float = Field(default=0.5, ge=0.0, le=1.0)
    n_samples: int = Field(default=20_000, ge=1, alias="N")
    supersample_ratio: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def force_uncertainty_ratio(self) -> ProposalConfig:
        """UB is pure uncertainty sampling whatever r was given."""
        if self.kind is ProposalKind.UB and self.r != 1.0:
            self.r = 1.0
        return self


class EngineConfig(BaseModel):
    """Configuration of a batch quadrature run.

    `max_evaluations` counts likelihood evaluations spent by batch steps;
    the initial design is not charged against it.
    """

    batch_size: int = Field(default=100, ge=1)
    n_recombination: int = Field(default=20_000, ge=1)
    n_nystrom: int | None = Field(default=None, ge=1)
    r: float = Field(default=0.5, ge=0.0, le=1.0)
    proposal: ProposalKind = ProposalKind.IVR
    supersample_ratio: int = Field(default=100, ge=1)
    variance_threshold: float = Field(default=1e-8, gt=0)
    max_evaluations: int = Field(default=1000, ge=0)
    hyperopt_every: int = Field(default=1, ge=1)
    hyperopt_restarts: int = Field(default=3, ge=0)
    hyperopt_max_evals: int = Field(default=200, ge=1)
    initial_lengthscale: float = Field(default=2.0, gt=0)
    initial_variance: float = Field(default=2.0, gt=0)
    alpha_factor: float = 0.8
    seed: int = 0
    proper: bool = False
    serial_likelihood: bool = False
    max_workers: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def check_sample_sizes(self) -> EngineConfig:
        """Warn when N ≫ M > n does not hold."""
        if self.n_recombination < 10 * self.nystrom_size:
            logger.warning(
                f"Recombination sample size N={self.n_recombination} is below "
                f"10·M={10 * self.nystrom_size}"
            )
        if self.nystrom_size < 2 * self.batch_size:
            logger.warning(
                f"Nyström sample size M={self.nystrom_size} is below 2·n={2 * self.batch_size}"
            )
        if math.isnan(self.variance_threshold):
            raise ValueError("variance_threshold must be a number")
        return self

    @property
    def nystrom_size(self) -> int:
        """M, defaulting to N/100 (at least the batch size)."""
        if self.n_nystrom is not None:
            return self.n_nystrom
        return max(self.n_recombination // 100, self.batch_size)

    def proposal_config(self, n_samples: int) -> ProposalConfig:
        """The ProposalConfig for a draw of `n_samples` points."""
        return ProposalConfig(
            kind=self.proposal,
            r=self.r,
            n_samples=n_samples,
            supersample_ratio=self.supersample_ratio,
        )
