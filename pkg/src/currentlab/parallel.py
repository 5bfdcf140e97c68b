"""Deterministic parallel map.

The worker count comes from the ``CURRENTLAB_THREADS`` environment variable
(default 1).  Results are always returned in input order.
"""

import os
from concurrent.futures import ThreadPoolExecutor


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get("CURRENTLAB_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    items = list(items)
    workers = n_workers()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
