"""Durable ordered map from prefix keys to index entries.

Write path: WAL append (one fsync per batch) -> memtable; a full memtable
flushes to a level-0 run. Read path: memtable, then runs newest-to-oldest,
with bloom filters and fence indexes limiting disk touches. Compaction is
parameterized by the (T, K) shape; shape changes are lazy: the target shape
steers future flush/compaction cycles, never an eager rewrite.

Single logical writer; readers work off immutable run files and a
copy-on-write manifest snapshot, so they never block behind compaction.
"""
from __future__ import annotations

import bisect
import heapq
import os
import re
import threading
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .. import crashpoints
from ..errors import CorruptionError, UsageError
from .manifest import CURRENT, PREVIOUS, TEMP, LsmShape, Manifest, RunMeta
from .manifest import commit as commit_manifest
from .manifest import load as load_manifest
from .records import ENTRY_SIZE, IndexEntry
from .runfile import RunReader, write_run
from .wal import WalWriter, replay

_RUN_RE = re.compile(r"run-([0-9a-f]{8})\.sst$")
_WAL_RE = re.compile(r"wal-([0-9a-f]{8})\.log$")

# Level 0 absorbs flush bursts beyond K, but writers stall (compact inline)
# past this multiple of K.
L0_BURST_FACTOR = 2


@dataclass
class IndexStats:
    puts: int = 0
    entries_put: int = 0
    gets: int = 0
    scans: int = 0
    bloom_probes: int = 0
    bloom_negatives: int = 0
    data_block_reads: int = 0
    flushes: int = 0
    bytes_flushed: int = 0
    compactions: int = 0
    runs_merged: int = 0
    bytes_rewritten: int = 0
    run_moves: int = 0
    consolidations: int = 0
    wal_bytes: int = 0
    stalls: int = 0


@dataclass
class CompactionReport:
    runs_merged: int = 0
    bytes_rewritten: int = 0
    run_moves: int = 0
    consolidations: int = 0
    new_runs: list[int] = field(default_factory=list)

    def is_noop(self) -> bool:
        return not (self.runs_merged or self.run_moves or self.consolidations)


def _wal_name(gen: int) -> str:
    return f"wal-{gen:08x}.log"


class LsmIndex:
    def __init__(self, directory: str, manifest: Manifest):
        self.directory = directory
        self._manifest = manifest
        self._mem: dict[bytes, IndexEntry] = {}
        self._mem_keys: list[bytes] = []
        self._mem_bytes = 0
        self._readers: dict[int, RunReader] = {}
        self._wal: Optional[WalWriter] = None
        self._lock = threading.Lock()
        self.stats = IndexStats()
        # Running totals for the cost model's average entry size.
        self._pair_bytes_total = 0
        self._pairs_total = 0

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def open(cls, directory: str, shape: LsmShape | None = None) -> "LsmIndex":
        """Open or recover an index directory.

        A fresh directory needs ``shape``; an existing one takes its shape
        from the manifest. Orphan files from interrupted operations are
        removed, then the active WAL is replayed into the memtable.
        """
        os.makedirs(directory, exist_ok=True)
        m = load_manifest(directory)
        if m is None:
            if shape is None:
                raise UsageError("fresh index directory requires a shape")
            m = Manifest(shape.validate(), shape.validate())
            commit_manifest(directory, m)
        idx = cls(directory, m)
        idx._clean_orphans()
        idx._replay_wal()
        return idx

    def close(self) -> None:
        with self._lock:
            if self._wal is not None:
                self._wal.close()
                self._wal = None
            for r in self._readers.values():
                r.close()
            self._readers.clear()

    def _clean_orphans(self) -> None:
        live = {r.filename() for r in self._manifest.all_runs()}
        missing = set(live)
        for name in os.listdir(self.directory):
            if name in (CURRENT, PREVIOUS):
                continue
            path = os.path.join(self.directory, name)
            if name == TEMP or name.endswith(".tmp"):
                os.unlink(path)
                continue
            if _RUN_RE.match(name):
                if name in live:
                    missing.discard(name)
                else:
                    os.unlink(path)
                continue
            wm = _WAL_RE.match(name)
            if wm and int(wm.group(1), 16) != self._manifest.wal_gen:
                os.unlink(path)
        if missing:
            raise CorruptionError(
                f"manifest references missing run files: {sorted(missing)}"
            )

    def _replay_wal(self) -> None:
        path = os.path.join(self.directory, _wal_name(self._manifest.wal_gen))
        if os.path.exists(path):
            for batch in replay(path):
                for key, entry in batch:
                    self._mem_insert(key, entry)
        self._wal = WalWriter(path)

    # -- memtable ----------------------------------------------------------

    def _mem_insert(self, key: bytes, entry: IndexEntry) -> None:
        if key not in self._mem:
            bisect.insort(self._mem_keys, key)
            self._mem_bytes += len(key) + ENTRY_SIZE + 2
        self._mem[key] = entry

    # -- write path --------------------------------------------------------

    def put_batch(self, pairs: list[tuple[bytes, IndexEntry]]) -> None:
        """Durably insert pairs: one WAL fsync, then memtable, then a flush
        if the buffer filled. All pairs are visible to lookups on return."""
        if not pairs:
            return
        for key, _ in pairs:
            if not key:
                raise UsageError("empty key")
        with self._lock:
            self._wal.append_batch(pairs)
            self.stats.wal_bytes = self._wal.bytes_written
            for key, entry in pairs:
                self._mem_insert(key, entry)
                self._pair_bytes_total += len(key) + ENTRY_SIZE + 2
                self._pairs_total += 1
            self.stats.puts += 1
            self.stats.entries_put += len(pairs)
            if self._mem_bytes >= self._manifest.target_shape.M:
                self._flush_locked()
                cap = L0_BURST_FACTOR * self._manifest.target_shape.K
                stalled = False
                while self._manifest.levels and len(self._manifest.levels[0]) > cap:
                    stalled = True
                    self._compact_locked()
                if stalled:
                    self.stats.stalls += 1

    def flush(self) -> Optional[RunMeta]:
        with self._lock:
            return self._flush_locked()

    def _flush_locked(self) -> Optional[RunMeta]:
        if not self._mem:
            return None
        m = self._manifest.clone()
        run_id = m.next_run_id
        meta = self._write_run_file(
            run_id, ((k, self._mem[k]) for k in self._mem_keys)
        )
        crashpoints.hit("flush.after_run_write")
        m.next_run_id = run_id + 1
        old_gen = m.wal_gen
        m.wal_gen = old_gen + 1
        if not m.levels:
            m.levels.append([])
        m.levels[0].append(meta)
        commit_manifest(self.directory, m)
        self._manifest = m
        crashpoints.hit("flush.after_manifest")
        self._wal.close()
        old_wal = os.path.join(self.directory, _wal_name(old_gen))
        if os.path.exists(old_wal):
            os.unlink(old_wal)
        self._wal = WalWriter(os.path.join(self.directory, _wal_name(m.wal_gen)))
        self._mem = {}
        self._mem_keys = []
        self._mem_bytes = 0
        self.stats.flushes += 1
        self.stats.bytes_flushed += meta.bytes
        return meta

    def _write_run_file(self, run_id: int, pairs) -> RunMeta:
        name = f"run-{run_id:08x}.sst"
        final = os.path.join(self.directory, name)
        tmp = final + ".tmp"
        count, min_key, max_key = write_run(
            tmp, pairs, self._manifest.target_shape.bloom_bits_per_key
        )
        os.replace(tmp, final)
        size = os.path.getsize(final)
        return RunMeta(run_id, count, size, min_key, max_key)

    # -- read path ---------------------------------------------------------

    def _reader(self, meta: RunMeta) -> RunReader:
        r = self._readers.get(meta.run_id)
        if r is None:
            r = RunReader(
                os.path.join(self.directory, meta.filename()), meta.run_id
            )
            self._readers[meta.run_id] = r
        return r

    def _search_order(self, manifest: Manifest) -> Iterator[RunMeta]:
        for level in manifest.levels:
            yield from reversed(level)

    def get(self, key: bytes) -> Optional[IndexEntry]:
        self.stats.gets += 1
        entry = self._mem.get(key)
        if entry is not None:
            return entry
        manifest = self._manifest
        for meta in self._search_order(manifest):
            if key < meta.min_key or key > meta.max_key:
                continue
            reader = self._reader(meta)
            self.stats.bloom_probes += 1
            if not reader.may_contain(key):
                self.stats.bloom_negatives += 1
                continue
            entry = reader.get(key, self.stats)
            if entry is not None:
                return entry
        return None

    def range_scan(
        self, start: bytes, end: bytes
    ) -> Iterator[tuple[bytes, IndexEntry]]:
        """Merged key-ordered stream over [start, end); newest version of
        each key wins."""
        if start >= end:
            raise UsageError("range start must be < end")
        self.stats.scans += 1
        manifest = self._manifest
        mem, mem_keys = self._mem, self._mem_keys

        def mem_iter():
            i = bisect.bisect_left(mem_keys, start)
            for k in mem_keys[i:]:
                yield k, mem[k]

        sources: list[tuple[int, Iterator]] = [(0, mem_iter())]
        rank = 0
        for meta in self._search_order(manifest):
            rank += 1
            if meta.max_key < start or meta.min_key >= end:
                continue
            sources.append(
                (rank, self._reader(meta).iter_from(start, self.stats))
            )

        heap = []
        for rk, it in sources:
            for key, entry in it:
                heap.append((key, rk, entry, it))
                break
        heapq.heapify(heap)
        last = None
        while heap:
            key, rk, entry, it = heapq.heappop(heap)
            for nkey, nentry in it:
                heapq.heappush(heap, (nkey, rk, nentry, it))
                break
            if key >= end:
                continue
            if key == last:
                continue
            last = key
            yield key, entry

    # -- shape and compaction ---------------------------------------------

    @property
    def shape(self) -> LsmShape:
        return self._manifest.target_shape

    @property
    def current_shape(self) -> LsmShape:
        return self._manifest.current_shape

    def set_target_shape(self, shape: LsmShape) -> None:
        """Record a new target; structure converges through later cycles."""
        shape.validate()
        with self._lock:
            if shape == self._manifest.target_shape:
                return
            m = self._manifest.clone()
            m.target_shape = shape
            commit_manifest(self.directory, m)
            self._manifest = m

    def maybe_compact(self) -> CompactionReport:
        with self._lock:
            return self._compact_locked()

    def _compact_locked(self) -> CompactionReport:
        report = CompactionReport()
        m = self._manifest.clone()
        shape = m.target_shape
        old_k = m.current_shape.K
        decrease_pending = shape.K < old_k
        doomed: list[RunMeta] = []
        changed = False

        i = 0
        while i < len(m.levels):
            runs = m.levels[i]
            count_bad = len(runs) > shape.K
            bytes_bad = sum(r.bytes for r in runs) > shape.level_capacity(i)
            if not runs or not (count_bad or bytes_bad):
                i += 1
                continue

            if (
                count_bad
                and not bytes_bad
                and decrease_pending
                and len(runs) <= old_k
            ):
                # Shape transition K-down: consolidate in place during the
                # natural cycle instead of pushing data deeper.
                merged = self._merge_runs(m, runs)
                doomed.extend(runs)
                m.levels[i] = [merged]
                report.consolidations += 1
                report.runs_merged += len(runs)
                report.bytes_rewritten += merged.bytes
                report.new_runs.append(merged.run_id)
                changed = True
                i += 1
                continue

            if i + 1 >= len(m.levels):
                m.levels.append([])
            below = m.levels[i + 1]

            if len(below) + len(runs) <= shape.K:
                # Whole runs descend without a rewrite (K-up transitions and
                # capacity overflow with room below).
                below.extend(runs)
                report.run_moves += len(runs)
            elif len(below) + 1 <= shape.K:
                # Room for one more run below: fold level i into it.
                merged = self._merge_runs(m, runs)
                doomed.extend(runs)
                report.runs_merged += len(runs)
                report.bytes_rewritten += merged.bytes
                report.new_runs.append(merged.run_id)
                below.append(merged)
            else:
                # Next level is at its run bound: one merge of both levels.
                inputs = below + runs
                merged = self._merge_runs(m, inputs)
                doomed.extend(inputs)
                report.runs_merged += len(inputs)
                report.bytes_rewritten += merged.bytes
                report.new_runs.append(merged.run_id)
                m.levels[i + 1] = [merged]
            m.levels[i] = []
            changed = True
            i += 1

        while m.levels and not m.levels[-1]:
            m.levels.pop()

        structure_ok = all(len(level) <= shape.K for level in m.levels)
        if m.current_shape != shape and structure_ok:
            m.current_shape = shape
            changed = True

        if changed:
            commit_manifest(self.directory, m)
            self._manifest = m
            crashpoints.hit("compact.after_manifest")
            for meta in doomed:
                self._readers.pop(meta.run_id, None)
                path = os.path.join(self.directory, meta.filename())
                if os.path.exists(path):
                    os.unlink(path)
            self.stats.compactions += 1
            self.stats.runs_merged += report.runs_merged
            self.stats.bytes_rewritten += report.bytes_rewritten
            self.stats.run_moves += report.run_moves
            self.stats.consolidations += report.consolidations
        return report

    def _merge_runs(self, m: Manifest, runs: list[RunMeta]) -> RunMeta:
        """Merge runs (given newest-last) into one new run; newest wins."""

        def merged_pairs():
            heap = []
            iters = []
            # Lower rank = newer: reverse so the last run in arrival order
            # shadows the others.
            for rank, meta in enumerate(reversed(runs)):
                it = self._reader(meta).iter_from(b"")
                iters.append(it)
                for key, entry in it:
                    heap.append((key, rank, entry, it))
                    break
            heapq.heapify(heap)
            last = None
            while heap:
                key, rank, entry, it = heapq.heappop(heap)
                for nkey, nentry in it:
                    heapq.heappush(heap, (nkey, rank, nentry, it))
                    break
                if key == last:
                    continue
                last = key
                yield key, entry

        run_id = m.next_run_id
        m.next_run_id += 1
        meta = self._write_run_file(run_id, merged_pairs())
        crashpoints.hit("compact.after_run_write")
        return meta

    # -- introspection ------------------------------------------------------

    def entry_count(self) -> int:
        return len(self._mem) + sum(
            r.entry_count for r in self._manifest.all_runs()
        )

    def avg_entry_bytes(self) -> float:
        if self._pairs_total == 0:
            return float(ENTRY_SIZE + 2 + 8)
        return self._pair_bytes_total / self._pairs_total

    def level_run_counts(self) -> list[int]:
        return [len(level) for level in self._manifest.levels]

    def level_bytes(self) -> list[int]:
        return [sum(r.bytes for r in level) for level in self._manifest.levels]

    def memtable_bytes(self) -> int:
        return self._mem_bytes
