"""Counter-style random substreams and an ordered worker pool.

Every random draw in the package comes from a generator keyed by
(seed, stream tag, realization, sector), so results never depend on how work
is split across threads.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# stream tags
UNITARY = 1
GUE = 2
SYK = 3
CONJUGATION = 4
MONTE_CARLO = 5
STATE = 6

WORKERS_ENV = "CHARGECHAOS_WORKERS"


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return 1


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``list(map(fn, items))`` on a thread pool, results in input order."""
    items = list(items)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
