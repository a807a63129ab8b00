"""File-per-object baseline: one ``.kv`` file per stored block, named by
the hex digest of the block's chain key.

Implements the same put/probe/get surface as the engine so benchmarks can
swap backends; probe and get results are identical by construction, only
the resource profile differs (a file plus an open/read/close round trip
per block).
"""
from __future__ import annotations

import os
import time
from typing import Sequence

import numpy as np

from . import codec as codec_mod
from .config import EngineConfig, dump_config, load_config
from .engine import CONFIG_FILE, MaintenanceReport, ProbeResult
from .errors import UsageError
from .keycodec import chain_digest, chain_keys
from .stats import OpStats


class FileBackend:
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
        self.window = OpStats()
        self.lifetime = OpStats()
        self.syscalls = 0  # opens + reads/writes + closes
        self.tensor_bytes_during_index_compaction = 0
        self._closed = False

    def close(self) -> None:
        self._closed = True

    def _check_open(self) -> None:
        if self._closed:
            raise UsageError("backend is closed")

    def _path(self, key: bytes) -> str:
        return os.path.join(self.directory, f"{chain_digest(key):016x}.kv")

    def put_batch(
        self, tokens: Sequence[int] | np.ndarray, tensors: Sequence[bytes]
    ) -> int:
        self._check_open()
        t0 = time.perf_counter()
        keys = chain_keys(tokens, self.config.block_tokens)
        if len(tensors) != len(keys):
            raise UsageError(
                f"expected {len(keys)} per-block tensors, got {len(tensors)}"
            )
        stored = 0
        written = 0
        for i, key in enumerate(keys):
            path = self._path(key)
            if os.path.exists(path):
                self.syscalls += 1  # the existence check
                continue
            tensor = bytes(tensors[i])
            if not tensor:
                raise UsageError(f"empty tensor payload for block {i}")
            data, _ = codec_mod.encode_batch([tensor], self.config.codec_id)
            with open(path, "wb") as f:
                f.write(data)
            self.syscalls += 3
            stored += 1
            written += len(data)
        dt = time.perf_counter() - t0
        for stats in (self.window, self.lifetime):
            stats.writes += stored
            stats.bytes_written += written
            stats.put_seconds += dt
        return stored

    def probe(self, tokens: Sequence[int] | np.ndarray) -> ProbeResult:
        self._check_open()
        t0 = time.perf_counter()
        keys = chain_keys(tokens, self.config.block_tokens)
        lo, hi = 0, len(keys)
        hits = 0
        while lo < hi:
            mid = (lo + hi + 1) // 2
            self.syscalls += 1
            if os.path.exists(self._path(keys[mid - 1])):
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
        return ProbeResult(lo, lo * self.config.block_tokens)

    def get_batch(
        self, tokens: Sequence[int] | np.ndarray, upto_blocks: int
    ) -> list[bytes]:
        self._check_open()
        if upto_blocks == 0:
            return []
        t0 = time.perf_counter()
        keys = chain_keys(tokens, self.config.block_tokens)
        if upto_blocks < 0 or upto_blocks > len(keys):
            raise UsageError(f"upto_blocks {upto_blocks} out of range")
        out = []
        read = 0
        for key in keys[:upto_blocks]:
            try:
                with open(self._path(key), "rb") as f:
                    data = f.read()
            except FileNotFoundError as exc:
                raise UsageError(f"block for key {key.hex()} not stored") from exc
            self.syscalls += 3
            read += len(data)
            out.append(codec_mod.decode_batch(data, self.config.codec_id)[0])
        dt = time.perf_counter() - t0
        for stats in (self.window, self.lifetime):
            stats.range_scans += 1
            stats.range_entries += upto_blocks
            stats.bytes_read += read
            stats.get_seconds += dt
        return out

    def maintenance_tick(self) -> MaintenanceReport:
        self._check_open()
        report = MaintenanceReport()
        report.tensor_files_before = report.tensor_files_after = self.file_count()
        return report

    def snapshot_stats(self) -> OpStats:
        return self.window.copy()

    def reset_window(self) -> OpStats:
        snap = self.window.copy()
        self.window = OpStats()
        return snap

    def file_count(self) -> int:
        return sum(1 for n in os.listdir(self.directory) if n.endswith(".kv"))
