"""Deterministic shuffling for reproducible batch tables.

The generator is pinned to SplitMix64 and the shuffle to Fisher-Yates
(indices walked high to low, ``j = next() mod (i + 1)``) so that a batch
table can be reproduced from the seed alone, on any platform or language.
``random.Random`` is deliberately not used: its shuffle algorithm is an
implementation detail we cannot pin.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

T = TypeVar("T")

_M64 = (1 << 64) - 1


class SplitMix64:
    """64-bit PRNG with a single u64 of state (Steele et al.'s mixer)."""

    def __init__(self, seed: int):
        self._state = seed & _M64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _M64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return z ^ (z >> 31)


def fisher_yates(items: list[T], rng: SplitMix64) -> None:
    """Shuffle ``items`` in place using ``rng`` as the randomness source."""
    for i in range(len(items) - 1, 0, -1):
        j = rng.next_u64() % (i + 1)
        items[i], items[j] = items[j], items[i]


def shuffled(items: Sequence[T], seed: int) -> list[T]:
    """Return a new list with the deterministic shuffle of ``items``."""
    out = list(items)
    fisher_yates(out, SplitMix64(seed))
    return out
