"""Named, reproducible random streams derived from one root seed."""

import zlib

import numpy as np


def stream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """
    Independent generator for a named purpose.

    Two calls with the same (seed, name, indices) return generators that
    produce identical sequences; different names never share state.

    Args:
        seed: Root seed of the run
        name: Purpose of the stream, e.g. "channel" or "contention"
        indices: Extra integers (episode index, BS index, ...)

    Returns:
        numpy Generator
    """
    key = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    key.extend(int(i) & 0xFFFFFFFF for i in indices)
    return np.random.default_rng(np.random.SeedSequence(key))
