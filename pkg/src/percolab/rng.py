"""Reproducible random number streams.

Per-sample seeds are derived with splitmix64, which is a bijection of the
64-bit integers: seed(m, i) = mix64(m + (i+1) * GOLDEN mod 2^64).  For a
fixed master seed the map i -> seed is injective, so streams never collide
by construction.  The derived seed keys a Philox-4x64 counter-based
generator (numpy's implementation), so sample generation is bit-identical
across runs, platforms and worker partitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15  # splitmix64 increment
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


@dataclass(frozen=True)
class SeedSchedule:
    """A master seed plus a base stream index.

    Stream i of a schedule uses the derived seed for index
    ``stream_index + i``; disjoint index ranges give independent streams.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed <= MASK64):
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be nonnegative")

    def shifted(self, offset: int) -> "SeedSchedule":
        return SeedSchedule(self.master_seed, self.stream_index + offset)


def splitmix64(x: int) -> int:
    """One splitmix64 mixing step (a 64-bit bijection)."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_seed(schedule: SeedSchedule, offset: int = 0) -> int:
    """Seed for stream ``schedule.stream_index + offset``.

    Pure function of (master_seed, index); distinct indices under the same
    master give distinct seeds because the pre-mix input is injective in the
    index and splitmix64 is a bijection.
    """
    i = schedule.stream_index + offset
    return splitmix64((schedule.master_seed + (i + 1) * GOLDEN) & MASK64)


def generator(seed: int) -> np.random.Generator:
    """Philox-4x64 generator keyed by a derived 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed))
