"""Portable deterministic randomness.

All randomness in gadgetlab flows through SplitMix64 (Steele, Lea & Flood's
mixer, as used for seeding in the xoshiro family).  It is implemented here in
~20 lines of exact 64-bit integer arithmetic, so streams are reproducible
bit-for-bit across platforms and Python versions; nothing depends on the
stdlib Mersenne Twister.
"""

from __future__ import annotations

from fractions import Fraction

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream seeded with a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound), by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def chance(self, prob: Fraction) -> bool:
        """Bernoulli draw; consumes exactly one u64 regardless of outcome."""
        if not 0 <= prob <= 1:
            raise ValueError("probability out of [0, 1]")
        threshold = (prob.numerator << 64) // prob.denominator
        return self.next_u64() < threshold

    def shuffle(self, items: list) -> None:
        """Fisher-Yates, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive(seed: int, *salts: int) -> int:
    """Derive an independent substream seed from (seed, salts).

    Feeding each salt through the mixer keeps streams for different indices
    decorrelated, so per-index generation is order-independent.
    """
    z = seed & _MASK
    for salt in salts:
        z = _mix((z ^ (salt & _MASK)) + _GAMMA & _MASK)
    return z
