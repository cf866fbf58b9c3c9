"""Concurrent evaluation of a batch of likelihood queries."""

import asyncio
import logging
import math
import time

import numpy as np

from batch_quadrature.exceptions import InvalidLikelihoodValueError
from batch_quadrature.state import EvaluationCounter, Likelihood

logger = logging.getLogger(__name__)


async def _evaluate_one(
    likelihood: Likelihood, point: np.ndarray, counter: EvaluationCounter
) -> float:
    start = time.perf_counter()
    value = float(await asyncio.to_thread(likelihood, point))
    await counter.record(time.perf_counter() - start)
    if math.isnan(value) or value == -math.inf:
        raise InvalidLikelihoodValueError.at_point(point, value)
    return value


async def evaluate_batch(
    likelihood: Likelihood,
    points: np.ndarray,
    counter: EvaluationCounter,
    max_workers: int | None = None,
    serial: bool = False,
) -> np.ndarray:
    """Evaluate the likelihood at every point and join before returning.

    Calls run in worker threads, at most `max_workers` at a time, or one
    after another when the likelihood is not safe to call concurrently.

    Args:
        likelihood: Maps a point (d,) to a likelihood value.
        points: Query points (n, d).
        counter: Records each call and the time spent in it.
        max_workers: Concurrency bound; unbounded when None.
        serial: Evaluate strictly sequentially.

    Returns:
        Likelihood values (n,).

    Raises:
        InvalidLikelihoodValueError: If a call returns NaN or −∞.
    """
    points = np.atleast_2d(points)
    if serial:
        values = [await _evaluate_one(likelihood, point, counter) for point in points]
        return np.asarray(values, dtype=float)

    semaphore = asyncio.Semaphore(max_workers or max(len(points), 1))

    async def bounded(point: np.ndarray) -> float:
        async with semaphore:
            return await _evaluate_one(likelihood, point, counter)

    values = await asyncio.gather(*(bounded(point) for point in points))
    logger.debug(f"Evaluated {len(values)} likelihood point(s)")
    return np.asarray(values, dtype=float)
