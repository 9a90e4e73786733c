"""Portable seeded randomness.

Per-item seeds and angles come from SplitMix64 (Steele, Lea & Flood 2014), a
64-bit mixing function that is trivial to reproduce in any language. Bulk
arrays (image noise, texture) use numpy's counter-based Philox generator
keyed by a SplitMix64-derived seed.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (the state is advanced first)."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*keys: int) -> int:
    """Fold integer keys into one 64-bit seed.

    ``derive_seed(seed, index)`` is the per-sample seed used everywhere, so
    serial and parallel generation agree.
    """
    h = 0
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK64))
    return h


def derive_seeds(seed: int, indices) -> np.ndarray:
    """Vectorised ``derive_seed(seed, i)`` over ``indices`` (uint64 array)."""
    return np.array([derive_seed(seed, int(i)) for i in indices], dtype=np.uint64)


def unit_float(x: int) -> float:
    """Map a 64-bit integer to ``[0, 1)`` using its top 53 bits."""
    return (int(x) >> 11) * (1.0 / (1 << 53))


def uniform_angle(*keys: int) -> float:
    """Angle in ``[0, 360)`` determined by ``keys``."""
    return 360.0 * unit_float(derive_seed(*keys))


def generator(*keys: int) -> np.random.Generator:
    """Philox-backed numpy generator keyed by ``derive_seed(*keys)``."""
    return np.random.Generator(np.random.Philox(key=derive_seed(*keys)))
