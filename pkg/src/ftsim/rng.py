"""Counter-based random streams (Philox4x32-10).

Output contract: a stream is keyed by a 64-bit seed ``s`` (key words
``s & 0xffffffff`` and ``s >> 32``).  Block ``i`` is the Philox4x32-10 image
of the counter ``(i & 0xffffffff, i >> 32, 0, 0)`` and yields four 32-bit
words, consumed in order.  A uniform double in [0, 1) is built from two
consecutive words ``a, b`` as ``((a >> 5) * 2**26 + (b >> 6)) / 2**53``.

Trial ``j`` of a run seeded with ``s`` uses the stream keyed by
``(s + j) mod 2**64``, so results never depend on how trials are scheduled.
"""
from __future__ import annotations

import numpy as np
from numba import njit

MASK32 = 0xFFFFFFFF
MASK64 = (1 << 64) - 1

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_LO = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@njit(cache=True, inline='always')
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x32 bijection; every argument is a uint64 holding 32 bits."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _LO
        hi1 = p1 >> _S32
        lo1 = p1 & _LO
        n0 = hi1 ^ c1 ^ k0
        n2 = hi0 ^ c3 ^ k1
        c0 = n0
        c1 = lo1
        c2 = n2
        c3 = lo0
        k0 = (k0 + _W0) & _LO
        k1 = (k1 + _W1) & _LO
    return c0, c1, c2, c3


@njit(cache=True)
def fill_block(out, key, start):
    """Write blocks ``start, start+1, ...`` of stream ``key`` into ``out`` (uint32, len % 4 == 0)."""
    k0 = np.uint64(key) & _LO
    k1 = np.uint64(key) >> _S32
    for b in range(out.shape[0] // 4):
        ctr = np.uint64(start + b)
        w0, w1, w2, w3 = philox4x32(ctr & _LO, ctr >> _S32, np.uint64(0), np.uint64(0), k0, k1)
        out[4 * b] = w0
        out[4 * b + 1] = w1
        out[4 * b + 2] = w2
        out[4 * b + 3] = w3


def trial_seed(seed: int, index: int) -> int:
    return (seed + index) & MASK64


class PhiloxStream:
    """Buffered reader over one keyed stream.  Deterministic and cheap to create."""

    _BLOCKS = 256

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        self.seed = seed
        self._buf = np.empty(4 * self._BLOCKS, dtype=np.uint32)
        self._next_block = 0
        self._words: list[int] = []
        self._pos = 0

    def _refill(self) -> None:
        fill_block(self._buf, np.uint64(self.seed), self._next_block)
        self._next_block += self._BLOCKS
        self._words = self._buf.tolist()
        self._pos = 0

    def next_u32(self) -> int:
        if self._pos >= len(self._words):
            self._refill()
        w = self._words[self._pos]
        self._pos += 1
        return w

    def random(self) -> float:
        a = self.next_u32()
        b = self.next_u32()
        return ((a >> 5) * 67108864 + (b >> 6)) / 9007199254740992.0

    def integers(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection on 32-bit words."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 32) - ((1 << 32) % n)
        while True:
            w = self.next_u32()
            if w < limit:
                return w % n

    def choice_weighted(self, weights) -> int:
        total = float(sum(weights))
        u = self.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return len(weights) - 1
