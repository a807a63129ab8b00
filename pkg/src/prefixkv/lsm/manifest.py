"""Manifest: the durable root of the index.

A manifest names every live run per level, the WAL generation whose records
are not yet in runs, and the current/target tree shapes. Commits write a
temp file, preserve the old version as MANIFEST.prev, then atomically
rename; recovery falls back to the previous version if the current one
fails its checksum.

File format: [magic 'PKMF'][crc32c u32 LE of body][body JSON bytes].
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field, replace

from .. import crashpoints, kernels
from ..errors import UnrecoverableError, UsageError

MAGIC = b"PKMF"
CURRENT = "MANIFEST"
PREVIOUS = "MANIFEST.prev"
TEMP = "MANIFEST.tmp"


@dataclass(frozen=True)
class LsmShape:
    T: int
    K: int
    M: int
    bloom_bits_per_key: int

    def validate(self) -> "LsmShape":
        if self.T < 2:
            raise UsageError(f"size ratio T={self.T} must be >= 2")
        if not 1 <= self.K <= self.T - 1:
            raise UsageError(f"runs parameter K={self.K} must be in [1, T-1]")
        if self.M <= 0:
            raise UsageError("write buffer M must be positive")
        if self.bloom_bits_per_key < 1:
            raise UsageError("bloom_bits_per_key must be >= 1")
        return self

    def level_capacity(self, level: int) -> int:
        return self.M * self.T ** (level + 1)


@dataclass(frozen=True)
class RunMeta:
    run_id: int
    entry_count: int
    bytes: int
    min_key: bytes
    max_key: bytes

    def filename(self) -> str:
        return f"run-{self.run_id:08x}.sst"


@dataclass
class Manifest:
    current_shape: LsmShape
    target_shape: LsmShape
    next_run_id: int = 0
    wal_gen: int = 0
    levels: list[list[RunMeta]] = field(default_factory=list)

    def clone(self) -> "Manifest":
        return replace(self, levels=[list(l) for l in self.levels])

    def all_runs(self) -> list[RunMeta]:
        return [r for level in self.levels for r in level]

    def to_json(self) -> bytes:
        def shape(s: LsmShape):
            return {"T": s.T, "K": s.K, "M": s.M, "bloom": s.bloom_bits_per_key}

        body = {
            "format": 1,
            "current_shape": shape(self.current_shape),
            "target_shape": shape(self.target_shape),
            "next_run_id": self.next_run_id,
            "wal_gen": self.wal_gen,
            "levels": [
                [
                    {
                        "run_id": r.run_id,
                        "entry_count": r.entry_count,
                        "bytes": r.bytes,
                        "min_key": r.min_key.hex(),
                        "max_key": r.max_key.hex(),
                    }
                    for r in level
                ]
                for level in self.levels
            ],
        }
        return json.dumps(body, sort_keys=True).encode()

    @classmethod
    def from_json(cls, data: bytes) -> "Manifest":
        body = json.loads(data)

        def shape(d) -> LsmShape:
            return LsmShape(d["T"], d["K"], d["M"], d["bloom"])

        return cls(
            current_shape=shape(body["current_shape"]),
            target_shape=shape(body["target_shape"]),
            next_run_id=body["next_run_id"],
            wal_gen=body["wal_gen"],
            levels=[
                [
                    RunMeta(
                        r["run_id"],
                        r["entry_count"],
                        r["bytes"],
                        bytes.fromhex(r["min_key"]),
                        bytes.fromhex(r["max_key"]),
                    )
                    for r in level
                ]
                for level in body["levels"]
            ],
        )


def _fsync_dir(directory: str) -> None:
    fd = os.open(directory, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def commit(directory: str, manifest: Manifest) -> None:
    body = manifest.to_json()
    blob = MAGIC + struct.pack("<I", kernels.crc32c(body)) + body
    tmp = os.path.join(directory, TEMP)
    cur = os.path.join(directory, CURRENT)
    prev = os.path.join(directory, PREVIOUS)
    with open(tmp, "wb") as f:
        f.write(blob)
        f.flush()
        os.fsync(f.fileno())
    crashpoints.hit("manifest.after_tmp_write")
    if os.path.exists(cur):
        with open(cur, "rb") as f:
            old = f.read()
        with open(prev, "wb") as f:
            f.write(old)
            f.flush()
            os.fsync(f.fileno())
        crashpoints.hit("manifest.after_prev_copy")
    os.replace(tmp, cur)
    _fsync_dir(directory)


def _try_load(path: str) -> Manifest | None:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except FileNotFoundError:
        return None
    if len(blob) < 8 or blob[:4] != MAGIC:
        return None
    (crc,) = struct.unpack_from("<I", blob, 4)
    body = blob[8:]
    if kernels.crc32c(body) != crc:
        return None
    try:
        return Manifest.from_json(body)
    except (ValueError, KeyError):
        return None


def load(directory: str) -> Manifest | None:
    """Latest intact manifest, or None for a fresh directory."""
    cur = os.path.join(directory, CURRENT)
    prev = os.path.join(directory, PREVIOUS)
    m = _try_load(cur)
    if m is not None:
        return m
    m = _try_load(prev)
    if m is not None:
        return m
    if not os.path.exists(cur) and not os.path.exists(prev):
        return None
    raise UnrecoverableError(
        f"both manifest versions in {directory} are corrupt"
    )
