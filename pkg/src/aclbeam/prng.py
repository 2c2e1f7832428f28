"""Deterministic xorshift64* pseudo-random generator.

Batch runs must reproduce byte-identically from a config seed, on any
platform, so the generator is spelled out here instead of relying on
numpy's default bit generator:

    x ^= x >> 12;  x ^= x << 25;  x ^= x >> 27
    output = (x * 2685821657736338717) mod 2^64

Floats are taken from the top 53 bits of the output word.
"""

_MASK = (1 << 64) - 1
_MULT = 2685821657736338717


class Xorshift64Star:
    """64-bit xorshift* stream; ``seed`` may be any integer except 0 mod 2^64."""

    def __init__(self, seed: int):
        state = seed & _MASK
        if state == 0:
            state = 0x9E3779B97F4A7C15  # golden-ratio fallback, seed 0 is a fixed point
        self._state = state

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & _MASK
        x ^= x >> 27
        self._state = x
        return (x * _MULT) & _MASK

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_symmetric(self) -> float:
        """Uniform float in [-1, 1)."""
        return 2.0 * self.uniform() - 1.0
