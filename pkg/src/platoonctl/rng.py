"""Deterministic random streams.

Noise generation is pinned so that runs reproduce bit-for-bit on any
platform: uniforms come from the SplitMix64 generator and normal deviates
from the Box-Muller transform, cosine branch only, consuming exactly two
uniforms per draw (the sine partner is never cached). Purpose-specific
streams derive from one master seed through `derive_seed`.
"""

import math

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

# Stream labels used when deriving per-purpose seeds from a master seed.
STREAM_DISTURBANCE = 0
STREAM_MLP_BASE = 1  # vehicle i uses STREAM_MLP_BASE + i


class SplitMix64:
    """64-bit SplitMix generator with uniform and normal draws."""

    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self):
        # 53-bit mantissa in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self):
        # Box-Muller; 1 - u1 keeps the log argument in (0, 1].
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def normals(self, n):
        return np.array([self.normal() for _ in range(n)])


def derive_seed(master, stream):
    """Stable per-purpose seed: one SplitMix64 output keyed on (master, stream)."""
    return SplitMix64((int(master) & _MASK) ^ ((stream * _GAMMA) & _MASK)).next_u64()
