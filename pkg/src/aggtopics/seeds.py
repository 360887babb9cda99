"""Seed derivation.

Every random stage derives its seed from one base seed as
``sha256(stage labels) XOR base``, so any stage can be re-run in isolation
and independent stages never share a stream.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def derive_seed(base_seed: int, *labels: str | int) -> int:
    """64-bit seed for the stage identified by `labels` under `base_seed`."""
    tag = "/".join(str(part) for part in labels)
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return (int.from_bytes(digest[:8], "little") ^ base_seed) & _MASK64


def splitmix64_pair(seed: int) -> tuple[int, int]:
    """Expand a seed into two nonzero 64-bit words (xorshift128+ state)."""
    state = seed & _MASK64

    def nxt() -> int:
        nonlocal state
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    s0, s1 = nxt(), nxt()
    if s0 == 0 and s1 == 0:
        s1 = 1
    return s0, s1
