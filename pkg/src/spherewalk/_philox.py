"""Counter-based random streams for reproducible walks.

Philox4x64-10, keyed per walk: key = (global seed, point_index << 32 |
sample_index), counter = (block, 0, 0, lane). Lane 0 carries the outer walk
draws, lane 1 the next-flight interior chains, so the outer ball sequence
never shifts when chain lengths change. Every backend implements exactly
this layout and the draw conventions below; the compiled core is tested
bitwise against this reference, and this reference against numpy's Philox.

Draw conventions (normative for all backends):
  u()            = (next_u64 >> 11) * 2^-53, in [0, 1)
  normal_pair()  = Box-Muller on (u1, u2): r = sqrt(-2 ln(1 - u1)),
                   a = 2 pi u2, returning (r cos a, r sin a)
"""

from __future__ import annotations

import math

MASK64 = (1 << 64) - 1

_M0 = 0xD2E7470EE14C6C93
_M1 = 0xCA5A826395121157
_W0 = 0x9E3779B97F4A7C15
_W1 = 0xBB67AE8584CAA73B


def _philox4x64_block(c0: int, c1: int, c2: int, c3: int, k0: int, k1: int) -> tuple[int, int, int, int]:
    """One Philox4x64-10 block: 10 rounds over the counter with key bumps."""
    for _ in range(10):
        p0 = _M0 * c0
        hi0, lo0 = (p0 >> 64) & MASK64, p0 & MASK64
        p1 = _M1 * c2
        hi1, lo1 = (p1 >> 64) & MASK64, p1 & MASK64
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & MASK64
        k1 = (k1 + _W1) & MASK64
    return c0, c1, c2, c3


class PhiloxStream:
    """One independent random stream addressed by (seed, stream_id, lane)."""

    __slots__ = ("_k0", "_k1", "_block", "_lane", "_buf", "_idx")

    def __init__(self, seed: int, stream_id: int, lane: int = 0) -> None:
        self._k0 = seed & MASK64
        self._k1 = stream_id & MASK64
        self._block = 0
        self._lane = lane & MASK64
        self._buf = (0, 0, 0, 0)
        self._idx = 4

    def next_u64(self) -> int:
        if self._idx == 4:
            # pre-increment matches numpy's Philox: the first block is ctr=1
            self._block = (self._block + 1) & MASK64
            self._buf = _philox4x64_block(self._block, 0, 0, self._lane, self._k0, self._k1)
            self._idx = 0
        v = self._buf[self._idx]
        self._idx += 1
        return v

    def u(self) -> float:
        """Uniform double in [0, 1), 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal_pair(self) -> tuple[float, float]:
        """Two independent standard normals by Box-Muller."""
        u1 = self.u()
        u2 = self.u()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        a = 2.0 * math.pi * u2
        return r * math.cos(a), r * math.sin(a)

    def lane_stream(self, lane: int) -> "PhiloxStream":
        """Fresh stream with the same key but a different counter lane.

        Lanes let one walk own several independent draw sequences (the
        next-flight interior chain uses lane 1) without perturbing the
        primary sequence.
        """
        s = PhiloxStream.__new__(PhiloxStream)
        s._k0 = self._k0
        s._k1 = self._k1
        s._block = 0
        s._lane = lane & MASK64
        s._buf = (0, 0, 0, 0)
        s._idx = 4
        return s


def walk_stream_id(point_index: int, sample_index: int) -> int:
    """Stream id layout shared by every backend."""
    return ((point_index & 0xFFFFFFFF) << 32) | (sample_index & 0xFFFFFFFF)
