"""Path-level worker parallelism.

Paths are split into contiguous index ranges, one per worker, and every
random value is a pure function of (seed, path index, component), so the
assembled result is bit-identical to a single-worker run no matter how
many processes share the work.  The worker count comes from the
NEUROMF_WORKERS environment variable (default 1).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .network import NetworkConfig, PathEnsemble, simulate

WORKERS_ENV = "NEUROMF_WORKERS"


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _chunk_ranges(n: int, workers: int) -> list[tuple[int, int]]:
    per = (n + workers - 1) // workers
    return [(lo, min(lo + per, n)) for lo in range(0, n, per)]


def _simulate_chunk(config: NetworkConfig, lo: int, hi: int) -> PathEnsemble:
    return simulate(config, n_paths=hi - lo, path_offset=lo)


def simulate_paths(config: NetworkConfig, n_paths: int, workers: int | None = None) -> PathEnsemble:
    """`simulate`, with paths optionally spread across processes."""
    workers = worker_count() if workers is None else max(1, workers)
    workers = min(workers, n_paths)
    if workers == 1:
        return simulate(config, n_paths=n_paths)
    ranges = _chunk_ranges(n_paths, workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_simulate_chunk, [config] * len(ranges),
                              [lo for lo, _ in ranges], [hi for _, hi in ranges]))
    first = parts[0]
    data = {k: np.concatenate([p.data[k] for p in parts], axis=0) for k in first.data}
    j = (np.concatenate([p.j for p in parts], axis=0) if first.j is not None else None)
    extremes = {}
    for name in first.extremes:
        los = [p.extremes[name][0] for p in parts]
        his = [p.extremes[name][1] for p in parts]
        extremes[name] = (min(los), max(his))
    return PathEnsemble(
        times=first.times, store_steps=first.store_steps, labels=first.labels,
        pop_of=first.pop_of, data=data, j=j, seed=first.seed,
        config_hash=first.config_hash, extremes=extremes,
    )
