"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(master_seed, *keys)``. A
Monte-Carlo batch keyed by its own index draws the same numbers no matter
which worker runs it or in what order, which is what makes results
independent of the worker count.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"unsupported stream key {key!r}")


def stream(master_seed: int, *keys) -> np.random.Generator:
    """Independent generator for the given (seed, key...) address."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(_as_int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def worker_stream(master_seed: int, worker: int) -> np.random.Generator:
    return stream(master_seed, "worker", worker)
