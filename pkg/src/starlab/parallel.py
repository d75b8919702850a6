"""Deterministic fan-out of chunked Monte Carlo work.

Work is cut into chunks of fixed size; chunk ``i`` always draws from
``stream.child(i)``, so results are identical for any worker count.  With
more than one worker the chunks run in forked processes, which lets the
task close over unpicklable objects such as support-function lambdas.
"""
from __future__ import annotations

import multiprocessing as mp

import numpy as np

_TASK = None


def _call(i):
    return _TASK(i)


def map_chunks(task, n_chunks: int, workers: int = 1) -> list:
    """``[task(i) for i in range(n_chunks)]``, optionally in forked workers."""
    global _TASK
    if workers <= 1 or n_chunks <= 1 or "fork" not in mp.get_all_start_methods():
        return [task(i) for i in range(n_chunks)]
    _TASK = task
    try:
        with mp.get_context("fork").Pool(min(workers, n_chunks)) as pool:
            return pool.map(_call, range(n_chunks), chunksize=1)
    finally:
        _TASK = None


def chunk_sizes(total: int, chunk: int) -> list:
    """Split ``total`` into pieces of size ``chunk`` (the last may be shorter)."""
    if total <= 0 or chunk <= 0:
        raise ValueError("total and chunk must be positive")
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def run_chunked(task, total: int, stream, chunk: int = 500, workers: int = 1) -> np.ndarray:
    """Concatenate ``task(size, stream.child(i))`` over the chunks of ``total``."""
    sizes = chunk_sizes(total, chunk)
    parts = map_chunks(lambda i: task(sizes[i], stream.child(i)), len(sizes), workers)
    return np.concatenate([np.asarray(p) for p in parts])
