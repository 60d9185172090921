"""Thread-pool helpers with schedule-independent results."""

from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")

_lock = threading.Lock()
_default_threads = 0

__all__ = ["block_ranges", "get_default_threads", "map_blocks", "resolve_threads", "set_default_threads"]


def set_default_threads(threads: int) -> None:
    """Set the worker count used when callers pass ``threads=None``."""

    if threads < 0:
        raise ValueError("threads must be >= 0")
    global _default_threads
    with _lock:
        _default_threads = int(threads)


def get_default_threads() -> int:
    with _lock:
        return _default_threads


def resolve_threads(threads: int | None) -> int:
    """Map ``None``/0 (auto) to a concrete positive worker count."""

    if threads is None:
        threads = get_default_threads()
    if threads <= 0:
        return max(1, os.cpu_count() or 1)
    return threads


def block_ranges(total: int, block_size: int) -> List[Tuple[int, int]]:
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    return [(start, min(start + block_size, total)) for start in range(0, total, block_size)]


def map_blocks(fn: Callable[[int, int], T], ranges: Sequence[Tuple[int, int]], threads: int | None = None) -> List[T]:
    """Apply ``fn(start, stop)`` to every range; results come back in range order."""

    workers = min(resolve_threads(threads), max(len(ranges), 1))
    if workers == 1 or len(ranges) <= 1:
        return [fn(start, stop) for start, stop in ranges]
    LOGGER.debug("Dispatching %d blocks over %d threads", len(ranges), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, start, stop) for start, stop in ranges]
        return [future.result() for future in futures]
