"""Seeded sub-streams and chunked execution with a fixed merge order."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK_SIZE = 1 << 18


def thread_count() -> int:
    """Worker count from ``OBVERSIM_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("OBVERSIM_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("OBVERSIM_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based Philox stream for ``(seed, *key)``.

    Streams for distinct keys are independent, and a stream depends only on
    its key, so the partition of work across threads never changes the draws.
    """
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(n: int, chunk: int = CHUNK_SIZE) -> list[int]:
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``[fn(i, item) ...]`` evaluated on a thread pool, returned in input order."""
    items = list(items)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(i, item) for i, item in enumerate(items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(len(items)), items))
