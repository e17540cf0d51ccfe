"""Worker pool for fanning path simulations out over threads.

Work is split into chunks whose boundaries depend only on the problem size,
and results are reassembled in index order, so the output of any run is
independent of the number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, List, Optional, Sequence, TypeVar

T = TypeVar("T")

_threads: Optional[int] = None


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("HARNACK_LAB_THREADS")
    return max(1, int(env)) if env else 1


def set_threads(n: Optional[int]) -> None:
    global _threads
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _threads = n


@contextmanager
def threads(n: Optional[int]):
    prev = _threads
    set_threads(n)
    try:
        yield
    finally:
        set_threads(prev)


def chunk_bounds(n_items: int, chunk: int) -> List[tuple]:
    chunk = max(1, int(chunk))
    return [(a, min(a + chunk, n_items)) for a in range(0, n_items, chunk)]


def map_ordered(fn: Callable[[tuple], T], bounds: Sequence[tuple]) -> List[T]:
    n = get_threads()
    if n == 1 or len(bounds) <= 1:
        return [fn(b) for b in bounds]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, bounds))
