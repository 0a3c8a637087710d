"""Seed derivation.

Every episode gets its own seed ``derive_seed(run_seed, *indices)`` so results
do not depend on how episodes are split across workers. The mix is the
SplitMix64 finaliser applied to the running value xor each index.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    x = (x + GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, *indices: int) -> int:
    h = mix64(seed & MASK64)
    for i in indices:
        h = mix64(h ^ (i & MASK64))
    return h
