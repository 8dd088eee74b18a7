"""Optional thread parallelism, sized by the LOWRANK_THREADS variable.

Unset means serial execution; ``0`` means one thread per CPU.  Work units
always own independent RNG streams, so the result never depends on how
(or whether) they are scheduled in parallel.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def thread_count() -> int:
    raw = os.environ.get("LOWRANK_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"LOWRANK_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ValueError("LOWRANK_THREADS must be >= 0")
    if value == 0:
        return os.cpu_count() or 1
    return value


def map_indexed(fn: Callable[[int], T], count: int) -> list[T]:
    """Evaluate ``fn(0), ..., fn(count-1)``, preserving index order."""
    workers = thread_count()
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
        return list(pool.map(fn, range(count)))
