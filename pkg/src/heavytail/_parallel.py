"""Reproducible block decomposition of Monte Carlo work.

Replications are cut into fixed-size blocks.  Block ``i`` draws from
``SeedSequence(seed, spawn_key=(i, stream))``, so the random input of every
replication depends only on (seed, block index) and never on how many
workers ran the blocks.  Results are merged in block order.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_BLOCK = 1 << 20
DEFAULT_BUFFER = 1 << 17

WALK_STREAM = 0
AUX_STREAM = 1


def resolve_workers(workers=None):
    if workers is None:
        env = os.environ.get("HEAVYTAIL_WORKERS")
        workers = int(env) if env else 1
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers


def block_plan(n, block_size=DEFAULT_BLOCK):
    n = int(n)
    if n < 0:
        raise ValueError("replication count must be >= 0")
    nblocks = max(1, math.ceil(n / block_size))
    return [(i, min(block_size, n - i * block_size)) for i in range(nblocks) if n - i * block_size > 0]


def stream(seed, block, which=WALK_STREAM):
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(int(block), int(which)))
    return np.random.Generator(np.random.PCG64(ss))


def run_blocks(fn, plan, workers=None):
    """Apply ``fn(block_index, size)`` to each block; results come back in plan order."""
    workers = resolve_workers(workers)
    if workers == 1 or len(plan) == 1:
        return [fn(i, size) for i, size in plan]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: fn(*item), plan))


def merge_float(parts):
    """Order-independent compensated sum of per-block float arrays."""
    parts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in parts]
    return np.array([math.fsum(col) for col in zip(*parts)])


def merge_int(parts):
    parts = [np.atleast_1d(np.asarray(p, dtype=np.int64)) for p in parts]
    out = np.zeros_like(parts[0])
    for p in parts:
        out += p
    return out


def derive_seed(seed, tag):
    """Child seed for an independent sub-experiment sharing the user's seed."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(1 << 20, int(tag)))
    return int(ss.generate_state(1, np.uint64)[0])
