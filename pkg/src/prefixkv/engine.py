"""Service facade: put_batch / probe / get_batch over the index and the
tensor log, plus maintenance and workload accounting.

Writes are two-phase: payloads are appended and fsynced to the tensor log
first, then the index entries land as one atomic batch. A crash between
the phases leaves orphan payloads (reclaimed by file merging) but never a
dangling index entry, so anything probe reports is retrievable.

Because put_batch stores an entry for every prefix depth of a sequence,
key presence is monotone in depth and probe can binary-search the longest
cached prefix with point lookups.
"""
from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import codec as codec_mod
from . import crashpoints, kernels
from .config import EngineConfig, dump_config, load_config
from .controller import Controller, CostModelParams
from .errors import UsageError
from .keycodec import chain_keys
from .lsm import IndexEntry, LsmIndex, LsmShape
from .lsm.runfile import BLOCK_TARGET
from .stats import OpStats
from .tensor_log import TensorLocation, TensorLog

CONFIG_FILE = "engine.conf"
CONTROLLER_LOG = "controller_log.jsonl"


@dataclass(frozen=True)
class ProbeResult:
    matched_blocks: int
    matched_tokens: int


@dataclass
class MaintenanceReport:
    compaction_runs_merged: int = 0
    compaction_bytes_rewritten: int = 0
    compaction_run_moves: int = 0
    tensor_files_before: int = 0
    tensor_files_after: int = 0
    tensor_records_remapped: int = 0
    tensor_bytes_reclaimed: int = 0
    retuned_shape: Optional[tuple[int, int]] = None
    details: dict = field(default_factory=dict)


class Engine:
    """One engine per directory; see module docstring for semantics."""

    def __init__(self, directory: str, config: EngineConfig | None = None):
        os.makedirs(directory, exist_ok=True)
        self.directory = directory
        conf_path = os.path.join(directory, CONFIG_FILE)
        if os.path.exists(conf_path):
            self.config = load_config(conf_path, base=config or EngineConfig())
        else:
            self.config = (config or EngineConfig()).validate()
            with open(conf_path, "w", encoding="utf-8") as f:
                f.write(dump_config(self.config))
        cfg = self.config
        shape = LsmShape(
            cfg.size_ratio, cfg.runs_per_level, cfg.memtable_bytes,
            cfg.bloom_bits_per_key,
        )
        self.index = LsmIndex.open(os.path.join(directory, "index"), shape)
        self.log = TensorLog(os.path.join(directory, "tensors"), cfg.file_cap)
        self.controller: Optional[Controller] = None
        if cfg.controller_enabled:
            self.controller = Controller(
                log_path=os.path.join(directory, CONTROLLER_LOG),
                window_min=cfg.controller_window_min,
                threshold=cfg.controller_threshold,
                t_max=cfg.controller_t_max,
            )
        self.window = OpStats()
        self.lifetime = OpStats()
        # Bytes the tensor log wrote during index compactions; the design
        # guarantees this stays zero (key-value separation).
        self.tensor_bytes_during_index_compaction = 0
        self._write_lock = threading.Lock()
        self._closed = False

    def close(self) -> None:
        if not self._closed:
            self.index.close()
            self.log.close()
            self._closed = True

    def _check_open(self) -> None:
        if self._closed:
            raise UsageError("engine is closed")

    # -- the three-operation contract ---------------------------------------

    def put_batch(
        self, tokens: Sequence[int] | np.ndarray, tensors: Sequence[bytes]
    ) -> int:
        """Store per-block payloads for every full block of ``tokens``.

        ``tensors[i]`` belongs to block i; entries for already-stored blocks
        are skipped (first write wins), and their payload slots may be
        placeholders. Returns the number of blocks stored.
        """
        self._check_open()
        t0 = time.perf_counter()
        bt = self.config.block_tokens
        keys = chain_keys(tokens, bt)
        depth = len(keys)
        if len(tensors) != depth:
            raise UsageError(
                f"expected {depth} per-block tensors, got {len(tensors)}"
            )
        if depth == 0:
            return 0
        with self._write_lock:
            stored_from = self._longest_present(keys)
            if stored_from >= depth:
                return 0
            crashpoints.hit("put.before_log_append")
            records = []
            crcs = []
            for i in range(stored_from, depth):
                tensor = bytes(tensors[i])
                if not tensor:
                    raise UsageError(f"empty tensor payload for block {i}")
                stored, _ = codec_mod.encode_batch([tensor], self.config.codec_id)
                raw_len = 8 + len(tensor)  # framed length before compression
                records.append((keys[i], stored, self.config.codec_id, raw_len))
                crcs.append(kernels.crc32c(stored))
            locations = self.log.append_batch(records, crcs=crcs)
            crashpoints.hit("put.after_log_append")
            pairs = []
            for (key, stored, codec_id, _), loc, crc in zip(records, locations, crcs):
                pairs.append(
                    (key, IndexEntry(loc.file_id, loc.offset, loc.length, codec_id, crc))
                )
            self.index.put_batch(pairs)
            crashpoints.hit("put.after_index_put")
        stored_count = depth - stored_from
        dt = time.perf_counter() - t0
        for stats in (self.window, self.lifetime):
            stats.writes += stored_count
            stats.bytes_written += sum(loc.length for loc in locations)
            stats.put_seconds += dt
        return stored_count

    def _longest_present(self, keys: list[bytes]) -> int:
        """Largest depth whose chain key is stored (0 if none); presence is
        monotone because every prefix depth is stored."""
        lo, hi = 0, len(keys)
        hits = 0
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.index.get(keys[mid - 1]) is not None:
                lo = mid
                hits += 1
            else:
                hi = mid - 1
        return lo

    def probe(self, tokens: Sequence[int] | np.ndarray) -> ProbeResult:
        """Longest stored prefix of ``tokens``, in blocks and tokens."""
        self._check_open()
        t0 = time.perf_counter()
        bt = self.config.block_tokens
        keys = chain_keys(tokens, bt)
        lo, hi = 0, len(keys)
        hits = 0
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.index.get(keys[mid - 1]) is not None:
                lo = mid
                hits += 1
            else:
                hi = mid - 1
        dt = time.perf_counter() - t0
        for stats in (self.window, self.lifetime):
            if lo == 0:
                stats.zero_probes += 1
            else:
                stats.point_reads_ok += hits
            stats.probe_seconds += dt
        return ProbeResult(matched_blocks=lo, matched_tokens=lo * bt)

    def get_batch(
        self, tokens: Sequence[int] | np.ndarray, upto_blocks: int
    ) -> list[bytes]:
        """Payloads for blocks 0..upto_blocks-1 via one range scan and one
        scatter-gather log read. ``upto_blocks`` must not exceed the probe
        result."""
        self._check_open()
        if upto_blocks == 0:
            return []
        t0 = time.perf_counter()
        keys = chain_keys(tokens, self.config.block_tokens)
        if upto_blocks < 0 or upto_blocks > len(keys):
            raise UsageError(f"upto_blocks {upto_blocks} out of range")
        wanted = {key: i for i, key in enumerate(keys[:upto_blocks])}
        start = keys[0]
        end = keys[upto_blocks - 1] + b"\x00"
        entries: list[Optional[IndexEntry]] = [None] * upto_blocks
        found = 0
        for key, entry in self.index.range_scan(start, end):
            i = wanted.get(key)
            if i is not None and entries[i] is None:
                entries[i] = entry
                found += 1
        if found < upto_blocks:
            raise UsageError(
                f"only {found} of {upto_blocks} requested blocks are stored"
            )
        locations = [
            TensorLocation(e.file_id, e.offset, e.length) for e in entries
        ]
        stored_payloads = self.log.read_batch(locations)
        out = []
        for entry, stored in zip(entries, stored_payloads):
            out.append(codec_mod.decode_batch(stored, entry.codec_id)[0])
        dt = time.perf_counter() - t0
        for stats in (self.window, self.lifetime):
            stats.range_scans += 1
            stats.range_entries += upto_blocks
            stats.bytes_read += sum(loc.length for loc in locations)
            stats.data_block_reads = self.index.stats.data_block_reads
            stats.get_seconds += dt
        return out

    # -- maintenance ---------------------------------------------------------

    def maintenance_tick(self) -> MaintenanceReport:
        """One maintenance turn: index compaction, tensor-file merging with
        index remap, then a controller window evaluation."""
        self._check_open()
        report = MaintenanceReport()
        with self._write_lock:
            tlog_before = self.log.stats.bytes_appended + self.log.stats.bytes_merged
            compaction = self.index.maybe_compact()
            self.tensor_bytes_during_index_compaction += (
                self.log.stats.bytes_appended
                + self.log.stats.bytes_merged
                - tlog_before
            )
            report.compaction_runs_merged = compaction.runs_merged
            report.compaction_bytes_rewritten = compaction.bytes_rewritten
            report.compaction_run_moves = compaction.run_moves

            report.tensor_files_before = self.log.file_count()
            if self.log.file_count() > self.config.max_tensor_files:
                reclaimed_before = self.log.stats.orphan_bytes_reclaimed

                def live_check(key: bytes) -> Optional[TensorLocation]:
                    entry = self.index.get(key)
                    if entry is None:
                        return None
                    return TensorLocation(entry.file_id, entry.offset, entry.length)

                remap = self.log.merge_files(
                    live_check, self.config.max_tensor_files
                )
                if remap:
                    updates = []
                    for key, old, new in remap:
                        entry = self.index.get(key)
                        assert entry is not None and entry.offset == old.offset
                        updates.append(
                            (key, replace(entry, file_id=new.file_id,
                                          offset=new.offset, length=new.length))
                        )
                    self.index.put_batch(updates)
                crashpoints.hit("merge.after_index_update")
                self.log.commit_merge()
                report.tensor_records_remapped = len(remap)
                report.tensor_bytes_reclaimed = (
                    self.log.stats.orphan_bytes_reclaimed - reclaimed_before
                )
            report.tensor_files_after = self.log.file_count()

            if self.controller is not None:
                choice = self.controller.tick(self.window, self._cost_params())
                if choice is not None:
                    shape = LsmShape(
                        choice.T, choice.K, self.config.memtable_bytes,
                        self.config.bloom_bits_per_key,
                    )
                    self.index.set_target_shape(shape)
                    self.reset_window()
                    report.retuned_shape = (choice.T, choice.K)
        return report

    def _cost_params(self) -> CostModelParams:
        entry_bytes = self.index.avg_entry_bytes()
        scans = max(1, self.window.range_scans)
        return CostModelParams(
            entries=max(1, self.index.entry_count()),
            entry_bytes=entry_bytes,
            buffer_bytes=self.config.memtable_bytes,
            block_entries=max(1.0, BLOCK_TARGET / entry_bytes),
            bloom_bits=self.config.bloom_bits_per_key,
            scan_entries_avg=self.window.range_entries / scans,
        )

    # -- stats ----------------------------------------------------------------

    def snapshot_stats(self) -> OpStats:
        return self.window.copy()

    def reset_window(self) -> OpStats:
        snap = self.window.copy()
        self.window = OpStats()
        return snap

    def file_count(self) -> int:
        """Total on-disk files (index runs + WAL + manifests + tensor files)."""
        count = len(os.listdir(os.path.join(self.directory, "index")))
        return count + self.log.file_count()
