"""Optional thread fan-out for independent solves.

``GEOMATCH_THREADS`` caps the worker count (unset or 1: run inline,
0: one worker per CPU).  Results always come back in input order so that
reductions stay deterministic.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    raw = os.environ.get("GEOMATCH_THREADS", "1").strip() or "1"
    try:
        n = int(raw)
    except ValueError:
        return 1
    if n <= 0:
        return os.cpu_count() or 1
    return n


def map_ordered(fn, items):
    items = list(items)
    workers = worker_count()
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
