"""SplitMix64 counter-based random streams.

Output ``i`` (0-based) of the stream with seed ``s`` is
``mix64(s + (i + 1) * 0x9E3779B97F4A7C15 mod 2^64)`` where ``mix64`` is the
SplitMix64 finaliser.  Being counter-based, any output can be computed
directly and streams are trivially reproducible in other languages.

Derived variates:

* uniform: ``(x >> 11) * 2^-53`` in ``[0, 1)``
* normal: Box-Muller on consecutive uniform pairs ``(u1, u2)`` giving
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` then ``... * sin(2 pi u2)``
* choice: partial Fisher-Yates, swap ``i`` with ``i + floor(u * (n - i))``
"""
from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z):
    """SplitMix64 finaliser on a Python int or a uint64 array."""
    if isinstance(z, np.ndarray):
        z = z.astype(np.uint64, copy=True)
        with np.errstate(over="ignore"):
            z ^= z >> np.uint64(30)
            z *= np.uint64(_M1)
            z ^= z >> np.uint64(27)
            z *= np.uint64(_M2)
            z ^= z >> np.uint64(31)
        return z
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix_seed(base: int, *values: int) -> int:
    """Fold integers into a 64-bit seed: ``h = mix64((h ^ v) + GOLDEN)``."""
    h = mix64((int(base) + GOLDEN) & MASK64)
    for v in values:
        h = mix64(((h ^ (int(v) & MASK64)) + GOLDEN) & MASK64)
    return h


class SplitMix64:
    """A stream of 64-bit outputs; every draw advances the counter."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self.counter = 0

    def next_u64(self, count: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + 1 + count, dtype=np.uint64)
        self.counter += count
        with np.errstate(over="ignore"):
            states = np.uint64(self.seed) + idx * np.uint64(GOLDEN)
        return mix64(states)

    def uniform(self, count: int) -> np.ndarray:
        return (self.next_u64(count) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))
        angle = 2.0 * np.pi * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:count]

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices of ``range(n)`` in draw order."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        perm = np.arange(n)
        u = self.uniform(k)
        for i in range(k):
            j = i + int(u[i] * (n - i))
            perm[i], perm[j] = perm[j], perm[i]
        return perm[:k].copy()
