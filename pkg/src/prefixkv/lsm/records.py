"""Index entry value type and its bit-exact wire encoding.

All integers little-endian; key bytes pass through untouched (they are
big-endian by construction in keycodec).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from ..errors import CorruptionError

ENTRY_FMT = "<IQIBI"
ENTRY_SIZE = struct.calcsize(ENTRY_FMT)  # 21


@dataclass(frozen=True)
class IndexEntry:
    file_id: int
    offset: int
    length: int
    codec_id: int
    payload_crc32c: int

    def pack(self) -> bytes:
        return struct.pack(
            ENTRY_FMT,
            self.file_id,
            self.offset,
            self.length,
            self.codec_id,
            self.payload_crc32c,
        )

    @classmethod
    def unpack(cls, buf: bytes, off: int = 0) -> "IndexEntry":
        return cls(*struct.unpack_from(ENTRY_FMT, buf, off))


def pack_pair(key: bytes, entry: IndexEntry) -> bytes:
    return struct.pack("<H", len(key)) + key + entry.pack()


def parse_pairs(buf: bytes) -> list[tuple[bytes, IndexEntry]]:
    out = []
    off = 0
    n = len(buf)
    while off < n:
        if off + 2 > n:
            raise CorruptionError("pair stream truncated at key length")
        (klen,) = struct.unpack_from("<H", buf, off)
        off += 2
        if off + klen + ENTRY_SIZE > n:
            raise CorruptionError("pair stream truncated in key or entry")
        key = buf[off : off + klen]
        off += klen
        out.append((key, IndexEntry.unpack(buf, off)))
        off += ENTRY_SIZE
    return out
