"""Batch Bayesian quadrature - model evidence and posteriors from parallel likelihood queries."""

from batch_quadrature.services.basq_engine import converged, init, posterior, resume, run, step

__all__ = ["converged", "init", "posterior", "resume", "run", "step"]
__version__ = "0.1.0"
