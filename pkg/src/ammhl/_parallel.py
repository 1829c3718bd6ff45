"""Chunked thread-pool execution with deterministic result placement."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

ENV_THREADS = "AMMHL_THREADS"


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def chunk_ranges(n: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(n, lo + chunk)) for lo in range(0, n, chunk)]


def run_chunks(fn: Callable[[int, int], None], n: int, chunk: int = 256,
               threads: int | None = None) -> None:
    """Call ``fn(lo, hi)`` for each chunk of ``range(n)``.

    ``fn`` must write only into its own slice of preallocated output, which
    makes the result independent of scheduling order.
    """
    ranges = chunk_ranges(n, chunk)
    workers = min(worker_count(threads), len(ranges))
    if workers <= 1:
        for lo, hi in ranges:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(fn, lo, hi) for lo, hi in ranges]:
            fut.result()


def map_ordered(fn: Callable, items: Sequence, threads: int | None = None) -> list:
    workers = min(worker_count(threads), max(1, len(items)))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
