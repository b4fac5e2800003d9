"""Deterministic per-decision randomness.

Every stochastic decision in a session draws exactly one uniform float from
a named stream. Streams are mutually independent: each is a splitmix64
generator seeded from SHA-256(decimal master seed + "|" + stream path), so
reordering draws in one stream never shifts another.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def derive_stream_seed(master_seed: int, path: str) -> int:
    digest = hashlib.sha256(f"{master_seed}|{path}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance one step; returns (new_state, output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class RngStream:
    """One named splitmix64 stream; one float per decision."""

    __slots__ = ("path", "state", "draws")

    def __init__(self, master_seed: int, path: str):
        self.path = path
        self.state = derive_stream_seed(master_seed, path)
        self.draws = 0

    def next_u64(self) -> int:
        self.state, out = splitmix64_next(self.state)
        self.draws += 1
        return out

    def next_float(self) -> float:
        """Uniform in [0, 1): top 53 bits of the next 64-bit output."""
        return (self.next_u64() >> 11) * 2.0**-53
