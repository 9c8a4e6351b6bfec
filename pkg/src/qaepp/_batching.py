from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# Work is split into chunks of a fixed size so the reduction order never
# depends on how many workers run them.
CHUNK_SIZE = 64


def chunk_slices(n: int, chunk_size: int = CHUNK_SIZE) -> list[slice]:
    return [slice(i, min(i + chunk_size, n)) for i in range(0, n, chunk_size)]


def map_chunks(fn: Callable[[slice], T], n: int, n_jobs: int | None = 1) -> list[T]:
    """Apply ``fn`` to consecutive index chunks of ``range(n)``; results keep chunk order."""
    slices = chunk_slices(n)
    if not n_jobs or n_jobs == 1 or len(slices) == 1:
        return [fn(s) for s in slices]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, slices))


def concat(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts, axis=0)
