"""Per-window operation accounting fed to the adaptive controller."""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass
class OpStats:
    writes: int = 0  # blocks stored
    point_reads_ok: int = 0  # present-key lookups during probes
    range_scans: int = 0
    zero_probes: int = 0  # probes that matched nothing
    bytes_written: int = 0
    bytes_read: int = 0
    data_block_reads: int = 0
    range_entries: int = 0  # entries returned by range scans
    put_seconds: float = 0.0
    probe_seconds: float = 0.0
    get_seconds: float = 0.0

    def total_ops(self) -> int:
        return self.writes + self.point_reads_ok + self.range_scans + self.zero_probes

    def proportions(self) -> tuple[float, float, float, float]:
        """(write, range-scan, point-read, zero-probe) shares; sums to 1."""
        total = self.total_ops()
        if total == 0:
            return (0.0, 0.0, 0.0, 0.0)
        return (
            self.writes / total,
            self.range_scans / total,
            self.point_reads_ok / total,
            self.zero_probes / total,
        )

    def copy(self) -> "OpStats":
        return replace(self)
