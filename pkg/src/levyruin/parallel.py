"""Fan-out of ensemble blocks to a process pool.

Blocks are the unit of randomness (see :mod:`levyruin.rng`), so the merged
result is the same for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Callable, List, Sequence, Tuple


def block_layout(n: int, block_size: int) -> List[Tuple[int, int]]:
    """(block_index, size) pairs covering ``n`` replicates."""
    if n <= 0:
        return []
    out = []
    k = 0
    start = 0
    while start < n:
        size = min(block_size, n - start)
        out.append((k, size))
        k += 1
        start += size
    return out


def _call(func, args, item):
    k, size = item
    return func(k, size, *args)


def map_blocks(func: Callable, n: int, block_size: int, args: Sequence = (), workers: int = 1) -> list:
    """Evaluate ``func(block_index, size, *args)`` over all blocks, in block order."""
    layout = block_layout(n, block_size)
    job = partial(_call, func, tuple(args))
    if workers <= 1 or len(layout) <= 1:
        return [job(item) for item in layout]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, layout))


def map_items(func: Callable, items: Sequence, args: Sequence = (), workers: int = 1) -> list:
    """Evaluate ``func(item, *args)`` for each item, in order."""
    job = partial(_call_item, func, tuple(args))
    if workers <= 1 or len(items) <= 1:
        return [job(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, items))


def _call_item(func, args, item):
    return func(item, *args)
