"""Named, order-independent random streams derived from one master seed."""
from __future__ import annotations

import zlib

import numpy as np

MAX_SEED = 2**64 - 1


def stream(seed: int, name: str, *counters: int) -> np.random.Generator:
    """Generator keyed on ``(seed, name, *counters)``.

    Streams for different names or counters are statistically independent, so
    the order in which modules draw cannot change what any of them sees.
    """
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    key = (zlib.crc32(name.encode("utf-8")), *(int(c) for c in counters))
    seq = np.random.SeedSequence(seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
