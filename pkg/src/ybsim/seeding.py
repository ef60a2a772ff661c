"""Deterministic seed derivation and shot partitioning.

A single 64-bit global seed is expanded with ``numpy.random.SeedSequence``
spawn keys. Shots are always cut into fixed-size blocks, block ``i`` drawing
from ``SeedSequence(seed, spawn_key=(*key, i))``, so the number of workers
cannot change any result.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SHOTS = 20_000
SEED_MAX = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream addressed by ``key`` under ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit child seed, e.g. for sweep point ``i``: ``derive_seed(seed, i)``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def block_sizes(shots: int, block: int = BLOCK_SHOTS) -> list[int]:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    full, rest = divmod(shots, block)
    return [block] * full + ([rest] if rest else [])


def _run_block(args):
    fn, n, seed, key = args
    return fn(n, rng_for(seed, *key))


def run_partitioned(fn: Callable[[int, np.random.Generator], object], shots: int, seed: int,
                    key: Sequence[int] = (), workers: int = 1, block: int = BLOCK_SHOTS) -> list:
    """Evaluate ``fn(n_block, rng)`` over fixed shot blocks; results in block order.

    ``fn`` must be picklable when ``workers > 1``.
    """
    jobs = [(fn, n, seed, (*key, i)) for i, n in enumerate(block_sizes(shots, block))]
    if workers <= 1 or len(jobs) == 1:
        return [_run_block(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_block, jobs))
