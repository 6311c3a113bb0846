"""Thread-pool helpers with a canonical (input-order) reduction."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "MOBILEMEDIUM_THREADS"


def default_workers() -> int:
    """Worker count from ``MOBILEMEDIUM_THREADS`` (default 1)."""
    raw = os.environ.get(ENV_THREADS, "").strip()
    if not raw:
        return 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{ENV_THREADS} must be a positive integer")
    return n


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """``[fn(x) for x in items]``, possibly on threads, always in input order."""
    items = list(items)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunks(n: int, size: int) -> List[range]:
    """Split ``range(n)`` into consecutive blocks of at most ``size``."""
    return [range(i, min(n, i + size)) for i in range(0, n, size)]
