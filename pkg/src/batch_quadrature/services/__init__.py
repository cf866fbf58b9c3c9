"""Quadrature services."""

from batch_quadrature.services import (
    analytic_quadrature,
    basq_engine,
    batch_evaluation,
    gaussian_algebra,
    nystrom_basis,
    proposal_samplers,
    recombination,
    warped_gp,
)

__all__ = [
    "analytic_quadrature",
    "basq_engine",
    "batch_evaluation",
    "gaussian_algebra",
    "nystrom_basis",
    "proposal_samplers",
    "recombination",
    "warped_gp",
]
