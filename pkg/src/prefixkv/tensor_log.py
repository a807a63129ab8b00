"""Append-only tensor payload store (the value half of key-value separation).

Records live in numbered files ``tlog-<file_id:08x>.dat`` capped at
``file_cap`` bytes. Record layout:

    [magic 'TLG1'][key_depth u16][key bytes][codec_id u8]
    [raw_len u32][stored_len u32][payload_crc32c u32][payload]

Integers little-endian; key bytes are the big-endian prefix key. Records
are immutable; reclamation happens by merging small adjacent files and
dropping records the index no longer references. Old files outlive a merge
until the caller confirms the index rewrite is durable, so concurrent
readers holding pre-merge locations stay valid.
"""
from __future__ import annotations

import os
import re
import struct
from dataclasses import dataclass
from typing import Callable, Optional

from . import crashpoints, kernels
from .errors import CorruptionError, StaleLocationError, UsageError

MAGIC = b"TLG1"
_FIXED = struct.Struct("<HBIII")  # depth, codec, raw_len, stored_len, crc
HEADER_BASE = 4 + _FIXED.size  # + key bytes

_FILE_RE = re.compile(r"tlog-([0-9a-f]{8})\.dat$")


@dataclass(frozen=True)
class TensorLocation:
    file_id: int
    offset: int
    length: int


@dataclass
class LogStats:
    appends: int = 0
    bytes_appended: int = 0
    fsyncs: int = 0
    reads: int = 0
    read_syscalls: int = 0
    bytes_read: int = 0
    merges: int = 0
    bytes_merged: int = 0
    orphan_bytes_reclaimed: int = 0
    files_deleted: int = 0


def encode_record(
    key: bytes, payload: bytes, codec_id: int, raw_len: int, crc: int | None = None
) -> bytes:
    depth, rem = divmod(len(key), 8)
    if rem or depth == 0:
        raise UsageError(f"malformed key length {len(key)}")
    if crc is None:
        crc = kernels.crc32c(payload)
    fixed = _FIXED.pack(depth, codec_id, raw_len, len(payload), crc)
    return MAGIC + fixed[:2] + key + fixed[2:] + payload


def record_size(key_len: int, payload_len: int) -> int:
    return HEADER_BASE + key_len + payload_len


def _parse_record(buf: bytes, off: int) -> Optional[tuple[bytes, int, int, bytes, int]]:
    """Parse one record at ``off``; returns (key, codec_id, raw_len, payload,
    total_len) or None when the bytes do not form an intact record."""
    if off + 6 > len(buf) or buf[off : off + 4] != MAGIC:
        return None
    (depth,) = struct.unpack_from("<H", buf, off + 4)
    key_end = off + 6 + depth * 8
    if depth == 0 or key_end + 13 > len(buf):
        return None
    key = buf[off + 6 : key_end]
    codec_id, raw_len, stored_len, crc = struct.unpack_from("<BIII", buf, key_end)
    payload_end = key_end + 13 + stored_len
    if payload_end > len(buf):
        return None
    payload = buf[key_end + 13 : payload_end]
    if kernels.crc32c(payload) != crc:
        return None
    return key, codec_id, raw_len, payload, payload_end - off


class TensorLog:
    def __init__(self, directory: str, file_cap: int = 256 * 1024 * 1024):
        if file_cap < HEADER_BASE + 8:
            raise UsageError("file_cap too small for any record")
        os.makedirs(directory, exist_ok=True)
        self.directory = directory
        self.file_cap = file_cap
        self.stats = LogStats()
        self._sizes: dict[int, int] = {}
        self._pending_delete: list[int] = []
        for name in os.listdir(directory):
            match = _FILE_RE.match(name)
            if match:
                fid = int(match.group(1), 16)
                self._sizes[fid] = os.path.getsize(os.path.join(directory, name))
        if self._sizes:
            self._active_id = max(self._sizes)
            self._truncate_torn_tail(self._active_id)
            self._next_id = self._active_id + 1
            self._active = open(self._path(self._active_id), "r+b")
            self._active.seek(self._sizes[self._active_id])
        else:
            self._active_id = 0
            self._next_id = 1
            self._active = open(self._path(0), "w+b")
            self._sizes[0] = 0

    def _path(self, file_id: int) -> str:
        return os.path.join(self.directory, f"tlog-{file_id:08x}.dat")

    def _truncate_torn_tail(self, file_id: int) -> None:
        """Scan a file after recovery; drop a torn trailing record."""
        path = self._path(file_id)
        with open(path, "rb") as f:
            buf = f.read()
        off = 0
        while off < len(buf):
            rec = _parse_record(buf, off)
            if rec is None:
                break
            off += rec[4]
        if off < len(buf):
            with open(path, "r+b") as f:
                f.truncate(off)
        self._sizes[file_id] = off

    def close(self) -> None:
        if self._active is not None:
            self._active.close()
            self._active = None

    def file_count(self) -> int:
        return len(self._sizes)

    def file_ids(self) -> list[int]:
        return sorted(self._sizes)

    def total_bytes(self) -> int:
        return sum(self._sizes.values())

    # -- append -------------------------------------------------------------

    def _roll(self) -> None:
        self._active.flush()
        os.fsync(self._active.fileno())
        self._active.close()
        self._active_id = self._next_id
        self._next_id += 1
        self._active = open(self._path(self._active_id), "w+b")
        self._sizes[self._active_id] = 0

    def append_batch(
        self,
        records: list[tuple[bytes, bytes, int, int]],
        crcs: list[int] | None = None,
    ) -> list[TensorLocation]:
        """Append (key, payload, codec_id, raw_len) records; one fsync for
        the whole batch. Locations are valid immediately on return.
        ``crcs`` lets callers reuse payload checksums they already hold."""
        if not records:
            return []
        locations = []
        for i, (key, payload, codec_id, raw_len) in enumerate(records):
            rec = encode_record(
                key, payload, codec_id, raw_len,
                crcs[i] if crcs is not None else None,
            )
            size = self._sizes[self._active_id]
            if size > 0 and size + len(rec) > self.file_cap:
                self._roll()
                size = 0
            self._active.write(rec)
            locations.append(TensorLocation(self._active_id, size, len(rec)))
            self._sizes[self._active_id] = size + len(rec)
            self.stats.bytes_appended += len(rec)
            crashpoints.hit("tlog.mid_batch")
        self._active.flush()
        os.fsync(self._active.fileno())
        self.stats.fsyncs += 1
        self.stats.appends += len(records)
        return locations

    # -- read ----------------------------------------------------------------

    def read_batch(self, locations: list[TensorLocation]) -> list[bytes]:
        """Stored payload bytes in request order; adjacent locations in the
        same file coalesce into single reads, every payload crc-checked."""
        if not locations:
            return []
        order: dict[TensorLocation, int] = {}
        for i, loc in enumerate(locations):
            order.setdefault(loc, i)
        out: list[Optional[bytes]] = [None] * len(locations)
        by_file: dict[int, list[TensorLocation]] = {}
        for loc in set(locations):
            by_file.setdefault(loc.file_id, []).append(loc)
        for fid, locs in by_file.items():
            locs.sort(key=lambda l: l.offset)
            path = self._path(fid)
            if fid not in self._sizes:
                raise StaleLocationError(f"tensor file {fid:08x} no longer exists")
            if fid == self._active_id:
                self._active.flush()
            try:
                f = open(path, "rb")
            except FileNotFoundError as exc:
                raise StaleLocationError(
                    f"tensor file {fid:08x} no longer exists"
                ) from exc
            with f:
                groups: list[list[TensorLocation]] = [[locs[0]]]
                for loc in locs[1:]:
                    prev = groups[-1][-1]
                    if loc.offset == prev.offset + prev.length:
                        groups[-1].append(loc)
                    else:
                        groups.append([loc])
                for group in groups:
                    start = group[0].offset
                    total = group[-1].offset + group[-1].length - start
                    f.seek(start)
                    buf = f.read(total)
                    self.stats.read_syscalls += 1
                    self.stats.bytes_read += len(buf)
                    if len(buf) != total:
                        raise CorruptionError(
                            f"short read at tlog {fid:08x}:{start}"
                        )
                    for loc in group:
                        rec = _parse_record(buf, loc.offset - start)
                        if rec is None or rec[4] != loc.length:
                            raise CorruptionError(
                                f"corrupt record at tlog {fid:08x}:{loc.offset}"
                            )
                        idx = order[loc]
                        out[idx] = rec[3]
        self.stats.reads += len(locations)
        # Duplicate locations in one request share the first copy.
        for i, loc in enumerate(locations):
            if out[i] is None:
                out[i] = out[order[loc]]
        return out  # type: ignore[return-value]

    # -- merge ----------------------------------------------------------------

    def merge_files(
        self,
        live_check: Callable[[bytes], Optional[TensorLocation]],
        max_files: int,
    ) -> list[tuple[bytes, TensorLocation, TensorLocation]]:
        """Consolidate smallest-adjacent files until at most ``max_files``
        remain, copying only records the index still references.

        Returns (key, old_location, new_location) for every copied record.
        Old files stay on disk until ``commit_merge`` so in-flight readers
        keep working; the caller must first make the index rewrite durable.
        """
        if max_files < 1:
            raise UsageError("max_files must be >= 1")
        remap: list[tuple[bytes, TensorLocation, TensorLocation]] = []
        if self.file_count() <= max_files:
            return remap

        candidates = sorted(
            fid for fid in self._sizes if fid != self._active_id
        )
        if len(candidates) < 2:
            return remap

        # Live record lengths per candidate, so the selected window can be
        # guaranteed to shrink the file count before any rewrite happens.
        live_lens: dict[int, list[int]] = {}
        for fid in candidates:
            lens = []
            for key, _codec, _raw, _payload, loc in self.scan_file(fid):
                if live_check(key) == loc:
                    lens.append(loc.length)
            live_lens[fid] = lens

        def packed_outputs(window: list[int]) -> int:
            files = 0
            size = 0
            for fid in window:
                for n in live_lens[fid]:
                    if size == 0 or size + n > self.file_cap:
                        files += 1
                        size = 0
                    size += n
            return files

        goal_removals = self.file_count() - max_files
        best = None  # ((gain, dead_bytes, -combined_size), window)
        for width in range(2, min(len(candidates), goal_removals + 1) + 1):
            for at in range(len(candidates) - width + 1):
                window = candidates[at : at + width]
                live_sum = sum(sum(live_lens[f]) for f in window)
                size = sum(self._sizes[f] for f in window)
                gain = width - -(-live_sum // self.file_cap)
                # Prefer count reduction, then orphan reclamation, then the
                # cheapest rewrite.
                rank = (gain, size - live_sum, -size)
                if best is None or rank > best[0]:
                    best = (rank, window)
        if best is None:
            return remap
        group = best[1]
        if len(group) - packed_outputs(group) <= 0:
            return remap  # every candidate is full of live data; merging
            # cannot reduce the count, so the bound is already tight

        merged_away: set[int] = set()
        out_f = None
        out_id = None
        out_size = 0

        def roll_output():
            nonlocal out_f, out_id, out_size
            if out_f is not None:
                out_f.flush()
                os.fsync(out_f.fileno())
                out_f.close()
            out_id = self._next_id
            self._next_id += 1
            out_f = open(self._path(out_id), "w+b")
            self._sizes[out_id] = 0
            out_size = 0

        roll_output()
        for fid in group:
            with open(self._path(fid), "rb") as f:
                buf = f.read()
            off = 0
            while off < len(buf):
                rec = _parse_record(buf, off)
                if rec is None:
                    break  # torn tail is never copied
                key, codec_id, raw_len, payload, total = rec
                old = TensorLocation(fid, off, total)
                if live_check(key) == old:
                    data = buf[off : off + total]
                    if out_size > 0 and out_size + total > self.file_cap:
                        roll_output()
                    out_f.write(data)
                    remap.append(
                        (key, old, TensorLocation(out_id, out_size, total))
                    )
                    out_size += total
                    self._sizes[out_id] = out_size
                    self.stats.bytes_merged += total
                else:
                    self.stats.orphan_bytes_reclaimed += total
                off += total
            merged_away.add(fid)
        out_f.flush()
        os.fsync(out_f.fileno())
        out_f.close()
        if out_size == 0:
            os.unlink(self._path(out_id))
            del self._sizes[out_id]
            remap = [r for r in remap if r[2].file_id != out_id]
        crashpoints.hit("merge.after_new_files")
        self._pending_delete = sorted(merged_away)
        self.stats.merges += 1
        return remap

    def commit_merge(self) -> None:
        """Delete pre-merge files; call only after the index rewrite is
        durable."""
        for fid in self._pending_delete:
            path = self._path(fid)
            if os.path.exists(path):
                os.unlink(path)
            self._sizes.pop(fid, None)
            self.stats.files_deleted += 1
        self._pending_delete = []

    def scan_file(self, file_id: int):
        """Yield (key, codec_id, raw_len, payload, location) for each intact
        record; stops at a torn tail."""
        with open(self._path(file_id), "rb") as f:
            buf = f.read()
        off = 0
        while off < len(buf):
            rec = _parse_record(buf, off)
            if rec is None:
                return
            key, codec_id, raw_len, payload, total = rec
            yield key, codec_id, raw_len, payload, TensorLocation(file_id, off, total)
            off += total
