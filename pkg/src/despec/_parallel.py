"""Row-blocked execution helper.

Per-pixel stages are written as functions over a row slice that write
into preallocated output arrays.  Because every operation inside those
functions is elementwise (no reductions across pixels), splitting the
image into row blocks and running the blocks on a thread pool produces
bit-identical results for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_ENV_THREADS = "DESPEC_THREADS"


def resolve_threads(requested: int) -> int:
    """Turn a requested worker count into an actual one (0 = auto)."""
    if requested and requested > 0:
        return requested
    env = os.environ.get(_ENV_THREADS)
    if env:
        try:
            n = int(env)
            if n > 0:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def row_slices(height: int, workers: int) -> list[slice]:
    workers = max(1, min(workers, height))
    step = (height + workers - 1) // workers
    return [slice(i, min(i + step, height)) for i in range(0, height, step)]


def run_rows(fn, height: int, threads: int) -> None:
    """Call fn(rows) for contiguous row slices covering [0, height)."""
    if threads <= 1 or height < 64:
        fn(slice(0, height))
        return
    blocks = row_slices(height, threads)
    if len(blocks) == 1:
        fn(blocks[0])
        return
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        # consume results so worker exceptions propagate
        list(pool.map(fn, blocks))
