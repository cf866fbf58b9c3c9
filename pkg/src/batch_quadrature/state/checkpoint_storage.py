"""JSON checkpoints of a quadrature run."""

import json
import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from batch_quadrature.exceptions import CheckpointError
from batch_quadrature.models import Checkpoint
from batch_quadrature.state.engine_state import EngineState

logger = logging.getLogger(__name__)


def to_checkpoint(state: EngineState) -> Checkpoint:
    """Snapshot the resumable part of a run."""
    return Checkpoint(
        X=state.model.X.tolist(),
        y=state.model.y.tolist(),
        params=state.model.params,
        config=state.config,
        trace=list(state.trace),
        initial_record=state.initial_record,
        iteration=state.iteration,
        evaluations=state.evaluations,
        batch_evaluations=state.batch_evaluations,
        rng_state=json.dumps(state.rng.bit_generator.state),
    )


def save_checkpoint(state: EngineState, path: str | Path) -> Path:
    """Write the run state to `path` as JSON.

    Args:
        state: The run to snapshot.
        path: Destination file; parent directories are created.

    Returns:
        The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_checkpoint(state).model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Checkpoint written to {path} at iteration {state.iteration}")
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read and validate a checkpoint.

    Raises:
        CheckpointError: If the file is missing or malformed.
    """
    path = Path(path)
    try:
        return Checkpoint.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, ValidationError) as e:
        raise CheckpointError.unreadable(str(path), str(e)) from e


def restore_rng(checkpoint: Checkpoint) -> np.random.Generator:
    """Rebuild the generator exactly where the run left it."""
    state = json.loads(checkpoint.rng_state)
    bit_generator = getattr(np.random, state["bit_generator"])()
    bit_generator.state = state
    return np.random.Generator(bit_generator)
