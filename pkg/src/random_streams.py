#!/usr/bin/env python3
"""
Reproducible random streams and the trial-level process pool.

Every random draw in the analyzer comes from a ``numpy.random.Generator`` on
the counter-based Philox bit generator, keyed by ``(master seed, purpose,
index)``. Two streams with different keys never overlap, so trial ``i`` sees
the same numbers no matter which worker runs it.
"""

from multiprocessing import Pool
from typing import Callable, Iterable, List, Optional, TypeVar

import numpy as np
import psutil

from error_handler import ValidationError
from structured_logging import get_logger

logger = get_logger("random_streams")

T = TypeVar("T")
R = TypeVar("R")

PURPOSES = {
    "init": 0,
    "data": 1,
    "evaluation": 2,
    "falsifier": 3,
    "phi-check": 4,
    "teacher": 5,
}


def stream(master_seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Return the generator for ``(master_seed, purpose, index)``."""
    if purpose not in PURPOSES:
        raise ValidationError(f"Unknown random stream purpose: {purpose}", {"field": "purpose"})
    if master_seed < 0 or index < 0:
        raise ValidationError("Seeds and stream indices must be non-negative", {"field": "seed"})
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(PURPOSES[purpose], int(index)))
    return np.random.Generator(np.random.Philox(seq))


def default_threads() -> int:
    """Physical core count, falling back to the logical count and then 1."""
    count = psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True)
    return max(1, int(count or 1))


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Order-preserving map over independent work units.

    ``func`` must be a module-level function and ``items`` plain picklable
    values. With ``threads <= 1`` everything runs in-process.
    """
    work = list(items)
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(work) <= 1:
        return [func(item) for item in work]
    threads = min(threads, len(work))
    logger.debug("dispatching work units", units=len(work), threads=threads)
    with Pool(processes=threads) as pool:
        return pool.map(func, work)
