# utils/rng.py
"""
Counter-based random streams.

Every stream is a numpy Generator over Philox keyed by (seed, index), so batch
k or pair k can be drawn on any thread, in any order, with the same result.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def stream_key(seed: int, index: int) -> int:
    if index < 0:
        raise ValueError(f"stream index must be >= 0, got {index}")
    return ((int(index) & MASK64) << 64) | (int(seed) & MASK64)


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for (seed, index)."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, index)))
