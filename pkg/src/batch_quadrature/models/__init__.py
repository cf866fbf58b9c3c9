"""Data models for batch Bayesian quadrature."""

from batch_quadrature.models.config_models import EngineConfig, ProposalConfig, ProposalKind
from batch_quadrature.models.gaussians import DiagGaussian, GaussianMixture
from batch_quadrature.models.kernels import Kernel, RbfKernelParams
from batch_quadrature.models.point_sets import WeightedPointSet
from batch_quadrature.models.results import (
    Checkpoint,
    EvidenceEstimate,
    HyperoptResult,
    Metrics,
    ReductionReport,
    RunSummary,
    TraceRecord,
)
from batch_quadrature.models.surrogates import NystromBasis, PosteriorModel, WarpedGpModel

__all__ = [
    "Checkpoint",
    "DiagGaussian",
    "EngineConfig",
    "EvidenceEstimate",
    "GaussianMixture",
    "HyperoptResult",
    "Kernel",
    "Metrics",
    "NystromBasis",
    "PosteriorModel",
    "ProposalConfig",
    "ProposalKind",
    "RbfKernelParams",
    "ReductionReport",
    "RunSummary",
    "TraceRecord",
    "WarpedGpModel",
    "WeightedPointSet",
]
