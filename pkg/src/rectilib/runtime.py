"""Process-wide runtime knobs.

``RECTILIB_THREADS`` caps the worker count used by the few data-parallel
loops in the library (per-point density profiling, per-cube scans).
Everything is deterministic regardless of the cap: work is partitioned
by index and reduced in index order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

_T = TypeVar("_T")
_R = TypeVar("_R")

ENV_THREADS = "RECTILIB_THREADS"


def max_threads() -> int:
    """Worker cap from the environment; 1 (sequential) when unset or bad."""
    raw = os.environ.get(ENV_THREADS, "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


def map_indexed(fn: Callable[[_T], _R], items: Sequence[_T]) -> list[_R]:
    """Map ``fn`` over ``items`` preserving order, threaded when allowed."""
    workers = min(max_threads(), len(items)) if items else 1
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
