"""Immutable sorted-run files.

Layout (format version 1):

    [data blocks][fence index][bloom][footer]

    data block:  [payload_len u32][payload_crc32c u32][packed pairs]
    fence index: [block_count u32] then per block
                 [first_key_len u16][first_key][block_off u64][payload_len u32]
    bloom:       [nbits u64][num_hashes u8][bit bytes]
    footer (36B at EOF):
                 [fence_off u64][bloom_off u64][entry_count u64]
                 [version u32][footer_crc u32][magic 'PKR1']

Integers little-endian; footer_crc is crc32c over the preceding 28 footer
bytes. Blocks seal at the first entry that brings the payload to >= 4 KiB.
"""
from __future__ import annotations

import bisect
import os
import struct
from typing import Iterable, Iterator, Optional

from .. import kernels
from ..errors import CorruptionError
from .bloom import BloomFilter, num_hashes
from .records import IndexEntry, pack_pair, parse_pairs

MAGIC = b"PKR1"
VERSION = 1
BLOCK_TARGET = 4096
FOOTER_SIZE = 36


def write_run(
    path: str,
    pairs: Iterable[tuple[bytes, IndexEntry]],
    bits_per_key: int,
    block_target: int = BLOCK_TARGET,
) -> tuple[int, bytes, bytes]:
    """Write a run from key-sorted ``pairs``; returns (entry_count, min_key,
    max_key). The file is fsynced but not renamed; callers own atomicity."""
    blocks: list[bytes] = []
    fence: list[tuple[bytes, int, int]] = []
    keys: list[bytes] = []
    cur: list[bytes] = []
    cur_len = 0
    cur_first: Optional[bytes] = None
    min_key = max_key = None
    count = 0
    data_off = 0

    def seal():
        nonlocal cur, cur_len, cur_first, data_off
        payload = b"".join(cur)
        hdr = struct.pack("<II", len(payload), kernels.crc32c(payload))
        blocks.append(hdr + payload)
        fence.append((cur_first, data_off, len(payload)))
        data_off += len(hdr) + len(payload)
        cur, cur_len, cur_first = [], 0, None

    prev = None
    for key, entry in pairs:
        if prev is not None and key <= prev:
            raise CorruptionError("run pairs not strictly increasing")
        prev = key
        rec = pack_pair(key, entry)
        if cur_first is None:
            cur_first = key
        cur.append(rec)
        cur_len += len(rec)
        keys.append(key)
        if min_key is None:
            min_key = key
        max_key = key
        count += 1
        if cur_len >= block_target:
            seal()
    if cur:
        seal()

    bf = BloomFilter.for_keys(max(1, count), bits_per_key)
    for k in keys:
        bf.add(k)

    fence_parts = [struct.pack("<I", len(fence))]
    for first_key, off, plen in fence:
        fence_parts.append(struct.pack("<H", len(first_key)) + first_key)
        fence_parts.append(struct.pack("<QI", off, plen))
    fence_bytes = b"".join(fence_parts)

    bloom_bytes = struct.pack("<QB", bf.nbits, bf.k) + bytes(bf.bits)

    fence_off = data_off
    bloom_off = fence_off + len(fence_bytes)
    head = struct.pack("<QQQI", fence_off, bloom_off, count, VERSION)
    footer = head + struct.pack("<I", kernels.crc32c(head)) + MAGIC

    with open(path, "wb") as f:
        for b in blocks:
            f.write(b)
        f.write(fence_bytes)
        f.write(bloom_bytes)
        f.write(footer)
        f.flush()
        os.fsync(f.fileno())
    return count, min_key or b"", max_key or b""


def encode_footer(fence_off: int, bloom_off: int, entry_count: int) -> bytes:
    head = struct.pack("<QQQI", fence_off, bloom_off, entry_count, VERSION)
    return head + struct.pack("<I", kernels.crc32c(head)) + MAGIC


class RunReader:
    """Open run file: fence and bloom resident, data blocks read on demand."""

    def __init__(self, path: str, run_id: int):
        self.path = path
        self.run_id = run_id
        self._f = open(path, "rb")
        size = os.fstat(self._f.fileno()).st_size
        if size < FOOTER_SIZE:
            raise CorruptionError(f"run {path}: too short for footer")
        self._f.seek(size - FOOTER_SIZE)
        footer = self._f.read(FOOTER_SIZE)
        if footer[32:] != MAGIC:
            raise CorruptionError(f"run {path}: bad footer magic")
        head, (crc,) = footer[:28], struct.unpack_from("<I", footer, 28)
        if kernels.crc32c(head) != crc:
            raise CorruptionError(f"run {path}: footer checksum mismatch")
        fence_off, bloom_off, self.entry_count, version = struct.unpack("<QQQI", head)
        if version != VERSION:
            raise CorruptionError(f"run {path}: unsupported version {version}")

        self._f.seek(fence_off)
        fence_bytes = self._f.read(bloom_off - fence_off)
        (nblocks,) = struct.unpack_from("<I", fence_bytes, 0)
        off = 4
        self.block_first_keys: list[bytes] = []
        self.block_locs: list[tuple[int, int]] = []
        for _ in range(nblocks):
            (klen,) = struct.unpack_from("<H", fence_bytes, off)
            off += 2
            self.block_first_keys.append(fence_bytes[off : off + klen])
            off += klen
            boff, blen = struct.unpack_from("<QI", fence_bytes, off)
            off += 12
            self.block_locs.append((boff, blen))

        bloom_head = self._f.read(9)
        nbits, k = struct.unpack("<QB", bloom_head)
        bits = bytearray(self._f.read((nbits + 7) // 8))
        self._bloom = BloomFilter(nbits, k, bits)

    def close(self) -> None:
        self._f.close()

    def may_contain(self, key: bytes) -> bool:
        return self._bloom.may_contain(key)

    def _read_block(self, idx: int) -> list[tuple[bytes, IndexEntry]]:
        boff, blen = self.block_locs[idx]
        self._f.seek(boff)
        raw = self._f.read(8 + blen)
        if len(raw) != 8 + blen:
            raise CorruptionError(f"run {self.path}: short block read")
        plen, crc = struct.unpack_from("<II", raw, 0)
        payload = raw[8:]
        if plen != blen or kernels.crc32c(payload) != crc:
            raise CorruptionError(
                f"run {self.path}: data block {idx} checksum mismatch"
            )
        return parse_pairs(payload)

    def _block_index_for(self, key: bytes) -> int:
        # Rightmost block whose first key is <= key.
        return bisect.bisect_right(self.block_first_keys, key) - 1

    def get(self, key: bytes, stats=None) -> Optional[IndexEntry]:
        idx = self._block_index_for(key)
        if idx < 0:
            return None
        if stats is not None:
            stats.data_block_reads += 1
        pairs = self._read_block(idx)
        keys = [k for k, _ in pairs]
        i = bisect.bisect_left(keys, key)
        if i < len(keys) and keys[i] == key:
            return pairs[i][1]
        return None

    def iter_from(
        self, start: bytes = b"", stats=None
    ) -> Iterator[tuple[bytes, IndexEntry]]:
        if not self.block_locs:
            return
        idx = max(0, self._block_index_for(start))
        while idx < len(self.block_locs):
            if stats is not None:
                stats.data_block_reads += 1
            for key, entry in self._read_block(idx):
                if key >= start:
                    yield key, entry
            idx += 1
