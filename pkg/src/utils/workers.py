"""
Worker pool helper
Fans independent solver calls out to threads and merges results in input order
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

from config.settings import validate_threads

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    Apply `func` to every item, optionally on a thread pool

    Results come back in the order of `items` whatever the thread count, so
    callers can merge them deterministically. The first exception raised by a
    worker propagates to the caller.

    Args:
        func: Pure function of one item
        items: Work items
        threads: Worker count (1 runs inline)

    Returns:
        List of results aligned with `items`
    """
    items = list(items)
    threads = validate_threads(threads)
    if threads == 1 or len(items) < 2:
        return [func(item) for item in items]
    logger.debug("dispatching %d items to %d threads", len(items), threads)
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))
