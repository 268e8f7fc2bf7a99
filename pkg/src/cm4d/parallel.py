"""Deterministic worker-pool fan-out.

Results are always combined in task order, and BLAS thread pools are
pinned to one thread around every task (in workers and in the
single-process path alike), so an N-worker run and a 1-worker run
produce bit-identical numbers.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

from threadpoolctl import threadpool_limits

WORKERS_ENV = "CM4D_WORKERS"


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "")
    if value.strip():
        return max(1, int(value))
    return os.cpu_count() or 1


def _call(task):
    fn, arg = task
    with threadpool_limits(limits=1):
        return fn(arg)


def ordered_map(fn: Callable, args: Sequence, workers: int | None = None) -> list:
    """Apply fn to each arg; results in input order regardless of workers."""
    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1 or len(args) <= 1:
        with threadpool_limits(limits=1):
            return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, [(fn, a) for a in args]))
