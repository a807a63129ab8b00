"""Pure-Python fallbacks for the checksum/digest kernels.

Bit-identical to the compiled twins in _ckernels.pyx; used when the
extension is unavailable or PREFIXKV_PURE=1 is set. Correct but slow on
multi-megabyte inputs.
"""
from __future__ import annotations

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF

# CRC-32C (Castagnoli), reflected polynomial.
_CRC32C_POLY = 0x82F63B78


def _make_crc_table() -> list[int]:
    table = []
    for n in range(256):
        c = n
        for _ in range(8):
            c = (c >> 1) ^ _CRC32C_POLY if c & 1 else c >> 1
        table.append(c)
    return table


_CRC_TABLE = _make_crc_table()


def crc32c(data: bytes, crc: int = 0) -> int:
    c = crc ^ 0xFFFFFFFF
    table = _CRC_TABLE
    for b in data:
        c = table[(c ^ b) & 0xFF] ^ (c >> 8)
    return c ^ 0xFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _U64
    return h


def fnv1a64_blocks(data: bytes, block_bytes: int) -> list[int]:
    """FNV-1a 64 of each consecutive ``block_bytes`` slice of ``data``.

    ``len(data)`` must be a multiple of ``block_bytes``.
    """
    if block_bytes <= 0:
        raise ValueError("block_bytes must be positive")
    if len(data) % block_bytes:
        raise ValueError("data length not a multiple of block_bytes")
    out = []
    for off in range(0, len(data), block_bytes):
        out.append(fnv1a64(data[off : off + block_bytes]))
    return out
