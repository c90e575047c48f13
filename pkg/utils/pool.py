# utils/pool.py
"""
Ordered worker pool over manifest records.

Results come back by input position, never by completion order, so output
files and reports do not depend on the thread count.
"""

from typing import Callable, List, Sequence, TypeVar

from joblib import Parallel, delayed

from core.logger import global_logger as logger

T = TypeVar("T")
R = TypeVar("R")


def run_ordered(fn: Callable[[T], R], items: Sequence[T], threads: int = 1, label: str = "work") -> List[R]:
    items = list(items)
    if not items:
        return []
    threads = max(1, int(threads))
    if threads == 1 or len(items) == 1:
        return [fn(item) for item in items]

    logger.log_debug(f"🧵 {label}: {len(items)} items on {threads} threads")
    # numpy/scipy release the GIL in the heavy loops, threads are enough
    return Parallel(n_jobs=threads, backend="threading")(delayed(fn)(item) for item in items)
