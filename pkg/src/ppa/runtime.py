"""Worker-pool sizing; PPA_NUM_THREADS caps parallelism."""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    cap = os.environ.get("PPA_NUM_THREADS", "")
    n = os.cpu_count() or 1
    if cap.strip():
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def thread_map(fn, items):
    """Map preserving order; threads only when the pool would exceed one worker.

    Work items must be independent; results are collected in submission
    order so parallel and serial execution produce identical output.
    """
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
