"""Counter-based random streams.

Every random quantity in the package is drawn from a Philox generator whose
key is ``(master seed, *path)``.  The path names the unit of work (scale and
rep index, chunk index, ...), so a result never depends on how the work was
split between workers and any single unit can be replayed alone.
"""
from __future__ import annotations

import os

import numpy as np

CHUNK = 1 << 15


def stream(seed, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def worker_count(requested: int | None = None) -> int:
    """Requested workers, capped by ``ISOCRIT_THREADS`` and the CPU count."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get("ISOCRIT_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def chunk_sizes(n: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])
