# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled checksum/digest kernels: CRC-32C (slice-by-4) and FNV-1a 64.

Bit-identical to the fallbacks in _kernels_py.
"""
from libc.stdint cimport uint8_t, uint32_t, uint64_t

cdef uint32_t CRC_POLY = 0x82F63B78u
cdef uint32_t[4][256] _tab

cdef void _init_tables():
    cdef uint32_t c
    cdef int n, k
    for n in range(256):
        c = <uint32_t>n
        for k in range(8):
            c = (c >> 1) ^ CRC_POLY if c & 1 else c >> 1
        _tab[0][n] = c
    for n in range(256):
        c = _tab[0][n]
        for k in range(1, 4):
            c = _tab[0][c & 0xFF] ^ (c >> 8)
            _tab[k][n] = c

_init_tables()


def crc32c(const uint8_t[::1] data not None, crc: int = 0):
    cdef uint32_t c = (<uint32_t>crc) ^ 0xFFFFFFFFu
    cdef Py_ssize_t i = 0, n = data.shape[0]
    while n - i >= 4:
        c ^= (<uint32_t>data[i]) | ((<uint32_t>data[i + 1]) << 8) | \
             ((<uint32_t>data[i + 2]) << 16) | ((<uint32_t>data[i + 3]) << 24)
        c = _tab[3][c & 0xFF] ^ _tab[2][(c >> 8) & 0xFF] ^ \
            _tab[1][(c >> 16) & 0xFF] ^ _tab[0][c >> 24]
        i += 4
    while i < n:
        c = _tab[0][(c ^ data[i]) & 0xFF] ^ (c >> 8)
        i += 1
    return c ^ 0xFFFFFFFFu


cdef uint64_t FNV_OFFSET = 0xCBF29CE484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001B3ULL


cdef inline uint64_t _fnv(const uint8_t* p, Py_ssize_t n) nogil:
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(n):
        h = (h ^ p[i]) * FNV_PRIME
    return h


def fnv1a64(const uint8_t[::1] data not None):
    if data.shape[0] == 0:
        return FNV_OFFSET
    return _fnv(&data[0], data.shape[0])


def fnv1a64_blocks(const uint8_t[::1] data not None, block_bytes: int):
    cdef Py_ssize_t bb = block_bytes
    if bb <= 0:
        raise ValueError("block_bytes must be positive")
    cdef Py_ssize_t n = data.shape[0]
    if n % bb:
        raise ValueError("data length not a multiple of block_bytes")
    out = []
    cdef Py_ssize_t off = 0
    while off < n:
        out.append(_fnv(&data[off], bb))
        off += bb
    return out
