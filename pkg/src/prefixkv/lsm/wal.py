"""Write-ahead log: one record per put batch.

Record layout (little-endian): [payload_len u32][payload_crc32c u32][payload]
where the payload is [pair_count u32] followed by packed (key, entry) pairs.
A torn tail is detected by length/checksum screening and truncated away on
replay; everything before it is applied.
"""
from __future__ import annotations

import os
import struct
from typing import Iterable

from .. import crashpoints, kernels
from .records import IndexEntry, pack_pair, parse_pairs

_HDR = struct.Struct("<II")


def encode_record(pairs: list[tuple[bytes, IndexEntry]]) -> bytes:
    payload = struct.pack("<I", len(pairs)) + b"".join(
        pack_pair(k, e) for k, e in pairs
    )
    return _HDR.pack(len(payload), kernels.crc32c(payload)) + payload


class WalWriter:
    def __init__(self, path: str):
        self.path = path
        self._f = open(path, "ab")
        self.bytes_written = 0

    def append_batch(self, pairs: list[tuple[bytes, IndexEntry]]) -> None:
        rec = encode_record(pairs)
        self._f.write(rec)
        self._f.flush()
        os.fsync(self._f.fileno())
        self.bytes_written += len(rec)
        crashpoints.hit("wal.after_append")

    def close(self) -> None:
        self._f.close()


def replay(path: str) -> Iterable[list[tuple[bytes, IndexEntry]]]:
    """Yield each intact batch in order; truncate a torn tail in place."""
    with open(path, "r+b") as f:
        data = f.read()
        off = 0
        good_end = 0
        batches = []
        while off + _HDR.size <= len(data):
            plen, crc = _HDR.unpack_from(data, off)
            end = off + _HDR.size + plen
            if end > len(data):
                break
            payload = data[off + _HDR.size : end]
            if kernels.crc32c(payload) != crc:
                break
            (count,) = struct.unpack_from("<I", payload, 0)
            pairs = parse_pairs(payload[4:])
            if len(pairs) != count:
                break
            batches.append(pairs)
            off = end
            good_end = end
        if good_end < len(data):
            f.truncate(good_end)
    return batches
