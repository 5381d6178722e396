"""splitmix64 pseudo-random generator.

Small, fast, and trivially portable; every stochastic element of the
simulation draws from one of these so a single master seed fixes the whole
run.  Child streams are derived by hashing a string label into the seed.
"""

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _fnv1a64(label: str) -> int:
    h = 0xCBF29CE484222325
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK
    return h


class SplitMix64:
    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform in [0, 1) with 53 bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        return self.next_u64() % n

    def expovariate(self, rate: float) -> float:
        if rate <= 0:
            raise ValueError("rate must be positive")
        return -math.log(1.0 - self.random()) / rate

    def derive(self, label: str) -> "SplitMix64":
        """Independent child stream keyed by label."""
        return SplitMix64(self.next_peek(label))

    def next_peek(self, label: str) -> int:
        # does not consume this stream's state
        mix = SplitMix64((self._state ^ _fnv1a64(label)) & _MASK)
        return mix.next_u64()


def derive_seed(seed: int, label: str) -> int:
    return SplitMix64(seed & _MASK).next_peek(label)
