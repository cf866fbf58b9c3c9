"""Run state for the quadrature engine."""

from batch_quadrature.state.checkpoint_storage import (
    load_checkpoint,
    restore_rng,
    save_checkpoint,
    to_checkpoint,
)
from batch_quadrature.state.counters import EvaluationCounter
from batch_quadrature.state.engine_state import EngineState, KernelFactory, Likelihood

__all__ = [
    "EngineState",
    "EvaluationCounter",
    "KernelFactory",
    "Likelihood",
    "load_checkpoint",
    "restore_rng",
    "save_checkpoint",
    "to_checkpoint",
]
