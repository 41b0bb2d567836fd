"""Row-blocked thread pool with a result layout independent of worker count.

Work is always cut into the same fixed blocks of rows; the number of threads
only decides how many blocks run at once. Each row is reduced on its own, so
the output is bit-identical for any ``DVARS_THREADS`` setting.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

BLOCK_ROWS = 1024
ENV_VAR = "DVARS_THREADS"


def worker_count() -> int:
    """Number of worker threads, read from ``DVARS_THREADS`` at call time."""
    raw = os.environ.get(ENV_VAR, "").strip()
    if not raw:
        return max(1, min(os.cpu_count() or 1, 8))
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def map_row_blocks(fn: Callable[[slice], np.ndarray], n_rows: int) -> np.ndarray:
    """Apply `fn` to consecutive row slices of length `BLOCK_ROWS` and concatenate.

    `fn` must return an array whose first axis matches the slice length.
    """
    slices = [slice(i, min(i + BLOCK_ROWS, n_rows)) for i in range(0, n_rows, BLOCK_ROWS)]
    if not slices:
        return fn(slice(0, 0))
    workers = min(worker_count(), len(slices))
    if workers == 1:
        parts = [fn(s) for s in slices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, slices))
    return np.concatenate(parts, axis=0)


def canonical_row_sums(a: np.ndarray) -> np.ndarray:
    """Sum each row of a nonnegative 2D array in ascending-value order.

    Sorting first fixes the reduction order by value rather than by voxel
    position, so the sums are reproducible bit-for-bit and unchanged by any
    relabelling of the columns.
    """
    a = np.asarray(a, dtype=np.float64)

    def block(s: slice) -> np.ndarray:
        return np.sort(a[s], axis=1).sum(axis=1)

    return map_row_blocks(block, a.shape[0])
