"""Deterministic, counter-based random streams.

Every randomized quantity in this package is drawn from a substream
identified by ``(seed, *tags)``.  Tags are small integers (a purpose
constant plus block/frame/restart indices), mixed into a 128-bit Philox
key with a splitmix64 chain.  Because substreams are independent of how
work is split across processes, results are bit-identical for any
worker count.

Gaussian variates are frozen to one documented algorithm: uniform
doubles from the raw Philox4x64-10 bit stream mapped through the inverse
normal CDF (``scipy.special.ndtri``).
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# purpose tags for substreams; must never collide
TAG_NOISE = 1
TAG_SYMBOLS = 2
TAG_INFO_BITS = 3
TAG_PERMUTATION = 4
TAG_LABELING = 5
TAG_PACKING = 6
TAG_LDPC = 7

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def mix_seed(seed: int, *tags: int) -> int:
    """Derive a 64-bit subseed from a master seed and integer tags."""
    h = _splitmix64(seed & _MASK64)
    for t in tags:
        h = _splitmix64(h ^ (t & _MASK64))
    return h


def _philox(seed: int, tags: tuple[int, ...]) -> np.random.Philox:
    h = mix_seed(seed, *tags)
    key = np.array([h, _splitmix64(h)], dtype=np.uint64)
    return np.random.Philox(key=key)


def raw64(seed: int, tags: tuple[int, ...], count: int) -> np.ndarray:
    """Raw uint64 words of the substream (Philox4x64-10)."""
    return _philox(seed, tags).random_raw(count)


def uniform01(seed: int, tags: tuple[int, ...], count: int) -> np.ndarray:
    """Uniform doubles in the open interval (0, 1)."""
    r = raw64(seed, tags, count)
    return ((r >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def gaussians(seed: int, tags: tuple[int, ...], count: int) -> np.ndarray:
    """Standard normal variates via inverse-CDF of uniform01."""
    return ndtri(uniform01(seed, tags, count))


def integers(seed: int, tags: tuple[int, ...], count: int, high: int) -> np.ndarray:
    """Integers uniform on [0, high), via floor(u * high)."""
    u = uniform01(seed, tags, count)
    return np.minimum((u * high).astype(np.int64), high - 1)


def bits(seed: int, tags: tuple[int, ...], count: int) -> np.ndarray:
    """Fair bits as uint8."""
    return (raw64(seed, tags, count) & np.uint64(1)).astype(np.uint8)


def permutation(seed: int, tags: tuple[int, ...], n: int) -> np.ndarray:
    """Fisher-Yates permutation of range(n) driven by the substream."""
    u = uniform01(seed, tags, max(n - 1, 0))
    perm = np.arange(n, dtype=np.int64)
    for i in range(n - 1, 0, -1):
        j = min(int(u[n - 1 - i] * (i + 1)), i)
        perm[i], perm[j] = perm[j], perm[i]
    return perm
