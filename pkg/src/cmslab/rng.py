"""Seed handling. Every random stream is derived from one master seed by a
fixed spawn key, so results do not depend on how work is partitioned."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

# first spawn-key component, one per consumer
RESAMPLE = 1
CHAIN = 2
ALT = 3
HOLDER = 4
VALIDATE = 5


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def chunks(n: int, workers: int) -> list[range]:
    workers = max(1, min(int(workers), n)) if n else 1
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def map_chunks(fn: Callable[[range], object], n: int, workers: int = 1) -> list:
    """Apply ``fn`` to contiguous index ranges, results in index order."""
    parts = chunks(n, workers)
    if len(parts) == 1:
        return [fn(parts[0])]
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        return list(pool.map(fn, parts))
