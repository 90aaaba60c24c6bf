"""Chunked evaluation with an optional thread pool.

The worker count comes from ``ELLIPTICAL_RADON_THREADS`` (default 1).  Each
chunk writes a disjoint slice of the output, so results do not depend on the
thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

THREADS_ENV = "ELLIPTICAL_RADON_THREADS"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunked_map(func: Callable[[slice], np.ndarray], total: int, chunk: int, out: np.ndarray) -> np.ndarray:
    """Fill ``out[s] = func(s)`` for consecutive slices of length ``chunk``."""
    chunk = max(1, int(chunk))
    slices = [slice(i, min(i + chunk, total)) for i in range(0, total, chunk)]
    workers = thread_count()
    if workers == 1 or len(slices) == 1:
        for s in slices:
            out[s] = func(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            for s, v in zip(slices, ex.map(func, slices)):
                out[s] = v
    return out
