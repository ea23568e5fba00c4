"""Deterministic fan-out over replicas.

Results come back in submission order, and every replica derives its own
random stream from (master seed, replica index), so aggregates are
bit-identical for any worker count.
"""

from concurrent.futures import ProcessPoolExecutor


def parallel_map(fn, items, workers=1):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunk))
