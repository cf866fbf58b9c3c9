"""Coroutine-safe accounting of likelihood evaluations."""

import asyncio


class EvaluationCounter:
    """Counts likelihood calls and the wall-clock time spent inside them.

    Uses asyncio.Lock so that concurrent batch evaluations update the
    counters consistently.
    """

    def __init__(self) -> None:
        """Initialize the counter with zero calls."""
        self._evaluations = 0
        self._likelihood_seconds = 0.0
        self._lock = asyncio.Lock()

    async def record(self, seconds: float) -> int:
        """Record one finished likelihood call.

        Args:
            seconds: Wall-clock time the call took.

        Returns:
            The total number of calls recorded so far.
        """
        async with self._lock:
            self._evaluations += 1
            self._likelihood_seconds += seconds
            return self._evaluations

    @property
    def evaluations(self) -> int:
        """Total number of likelihood calls."""
        return self._evaluations

    @property
    def likelihood_seconds(self) -> float:
        """Total seconds spent inside the likelihood."""
        return self._likelihood_seconds

    def restore(self, evaluations: int) -> None:
        """Continue counting from a checkpointed number of calls."""
        self._evaluations = evaluations
        self._likelihood_seconds = 0.0

    def reset(self) -> None:
        """Reset all counters to zero."""
        self._evaluations = 0
        self._likelihood_seconds = 0.0
