"""Order-preserving process-pool map used for per-class and per-realization work."""

import logging
import multiprocessing
from typing import Callable, Iterable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
    """
    Apply ``func`` to every item, in input order.

    ``func`` must be a module-level callable; items and results must pickle.
    With one worker (or one item) everything runs in-process.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    processes = min(workers, len(items))
    logger.debug("Mapping %d items over %d processes", len(items), processes)
    with multiprocessing.Pool(processes=processes) as pool:
        return pool.map(func, items)
