"""Deterministic random streams.

Every random draw in the package comes from a Philox (counter-based) generator
keyed by ``(seed, *stream_key)``.  Monte-Carlo loops split their trials into
fixed-size chunks and key each chunk by its index, so the numbers a chunk sees
do not depend on how many workers run or in which order chunks finish.
"""

from __future__ import annotations

import numpy as np

# Trials per independent substream in Monte-Carlo reductions.
CHUNK_TRIALS = 250


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for stream ``key`` under ``seed``.

    ``substream(s)`` and ``substream(s + 1)`` are statistically independent,
    as are ``substream(s, 0)`` and ``substream(s, 1)``.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(trials: int, chunk: int = CHUNK_TRIALS) -> list[int]:
    """Split ``trials`` into fixed-size chunks (the last one may be short)."""
    full, rest = divmod(trials, chunk)
    return [chunk] * full + ([rest] if rest else [])


def chunked_mean(fn, trials: int, seed: int, threads: int = 1) -> np.ndarray:
    """Average of ``fn(rng, size)`` chunk sums over ``trials`` draws.

    ``fn`` must return the *sum* over its ``size`` trials.  Chunk ``i`` always
    uses ``substream(seed, i)`` and partial sums are added in chunk order, so
    the result is bit-identical for any ``threads``.
    """
    sizes = chunk_sizes(trials)
    jobs = [(substream(seed, i), size) for i, size in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(rng, size) for rng, size in jobs]
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total / trials
