"""Seeded partitioning of Monte Carlo trials across workers.

Results depend only on ``(seed, workers)``: each worker gets a child of
``SeedSequence(seed)`` and a fixed share of the trials, and the partial
results come back in worker order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def split_trials(n_trials: int, workers: int) -> list[int]:
    base, extra = divmod(n_trials, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def run_partitioned(fn, n_trials: int, seed, workers: int = 1) -> list:
    """Call ``fn(n, rng)`` once per worker and return the results in worker order."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    children = as_seed_sequence(seed).spawn(workers)
    shares = split_trials(n_trials, workers)
    jobs = [(n, np.random.default_rng(ss)) for n, ss in zip(shares, children) if n > 0]
    if len(jobs) == 1:
        return [fn(*jobs[0])]
    with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
