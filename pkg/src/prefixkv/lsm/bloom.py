"""Bloom filter over run keys: no false negatives, tunable bits per key.

Uses double hashing from one 64-bit FNV digest (LevelDB-style delta), with
round(ln 2 * bits_per_key) probe positions. Expected false-positive rate is
~0.6185^bits_per_key.
"""
from __future__ import annotations

import math

from .. import kernels

_U64 = 0xFFFFFFFFFFFFFFFF


def num_hashes(bits_per_key: int) -> int:
    return max(1, round(math.log(2) * bits_per_key))


def _positions(key: bytes, k: int, nbits: int):
    h = kernels.fnv1a64(key)
    delta = ((h >> 17) | (h << 47)) & _U64
    for _ in range(k):
        yield h % nbits
        h = (h + delta) & _U64


class BloomFilter:
    __slots__ = ("nbits", "k", "bits")

    def __init__(self, nbits: int, k: int, bits: bytearray | None = None):
        self.nbits = max(8, nbits)
        self.k = k
        self.bits = bits if bits is not None else bytearray((self.nbits + 7) // 8)

    @classmethod
    def for_keys(cls, n_keys: int, bits_per_key: int) -> "BloomFilter":
        return cls(max(8, n_keys * bits_per_key), num_hashes(bits_per_key))

    def add(self, key: bytes) -> None:
        for pos in _positions(key, self.k, self.nbits):
            self.bits[pos >> 3] |= 1 << (pos & 7)

    def may_contain(self, key: bytes) -> bool:
        for pos in _positions(key, self.k, self.nbits):
            if not self.bits[pos >> 3] & (1 << (pos & 7)):
                return False
        return True
