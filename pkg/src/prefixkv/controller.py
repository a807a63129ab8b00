"""Workload-adaptive shape tuning.

Models per-operation I/O cost as a function of the tree shape (T, K):

    levels      L = max(1, ceil(log_T(N*e / M)))
    write       W = T*L / (B*K)
    range scan  S = K*L + d/B
    point read  R = K*L*p + 1        (present key)
    zero probe  Z = K*L*p            (absent key; p = bloom false-pos rate)

and minimizes the workload-weighted sum w*W + s*S + r*R + z*Z over an
exhaustive (T, K) grid. Shape pushes are lazy: the index restructures only
through its natural flush/compaction cycles.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .errors import UsageError
from .stats import OpStats

BLOOM_FP_BASE = 0.6185


@dataclass(frozen=True)
class WorkloadProfile:
    write: float
    range_scan: float
    point_read: float
    zero_probe: float

    def __post_init__(self):
        total = self.write + self.range_scan + self.point_read + self.zero_probe
        if abs(total - 1.0) > 1e-9:
            raise UsageError(f"profile proportions sum to {total}, expected 1")

    @classmethod
    def from_stats(cls, window: OpStats) -> "WorkloadProfile":
        return cls(*window.proportions())

    def l1_distance(self, other: "WorkloadProfile") -> float:
        return (
            abs(self.write - other.write)
            + abs(self.range_scan - other.range_scan)
            + abs(self.point_read - other.point_read)
            + abs(self.zero_probe - other.zero_probe)
        )

    def as_dict(self) -> dict:
        return {
            "w": self.write,
            "s": self.range_scan,
            "r": self.point_read,
            "z": self.zero_probe,
        }


@dataclass(frozen=True)
class CostModelParams:
    entries: int  # N: live entry count
    entry_bytes: float  # e: average encoded pair size
    buffer_bytes: int  # M
    block_entries: float  # B: entries per data block
    bloom_bits: int
    scan_entries_avg: float  # d: average entries returned per range scan

    def validate(self) -> "CostModelParams":
        if min(self.entries, self.buffer_bytes, self.bloom_bits) <= 0:
            raise UsageError("cost model params must be positive")
        if self.entry_bytes <= 0 or self.block_entries <= 0:
            raise UsageError("cost model params must be positive")
        return self


@dataclass(frozen=True)
class ShapeChoice:
    T: int
    K: int
    predicted_cost: float


def bloom_fp_rate(bloom_bits: int) -> float:
    return BLOOM_FP_BASE**bloom_bits


def level_count(params: CostModelParams, T: int) -> int:
    """Smallest L >= 1 with T^L >= N*e/M, i.e. ceil(log_T(N*e/M))."""
    if T < 2:
        raise UsageError("size ratio must be >= 2")
    ratio = params.entries * params.entry_bytes / params.buffer_bytes
    levels = 1
    cap = T
    while cap < ratio:
        cap *= T
        levels += 1
    return levels


def op_costs(params: CostModelParams, T: int, K: int) -> tuple[float, float, float, float]:
    """(write, range-scan, present point-read, absent probe) unit costs."""
    if not 1 <= K <= T - 1:
        raise UsageError(f"K={K} out of range for T={T}")
    levels = level_count(params, T)
    p = bloom_fp_rate(params.bloom_bits)
    write = T * levels / (params.block_entries * K)
    scan = K * levels + params.scan_entries_avg / params.block_entries
    absent = K * levels * p
    present = absent + 1
    return write, scan, present, absent


def total_cost(
    profile: WorkloadProfile, params: CostModelParams, T: int, K: int
) -> float:
    write, scan, present, absent = op_costs(params, T, K)
    return (
        profile.write * write
        + profile.range_scan * scan
        + profile.point_read * present
        + profile.zero_probe * absent
    )


def optimize(
    profile: WorkloadProfile, params: CostModelParams, t_max: int = 16
) -> ShapeChoice:
    """Exhaustive grid argmin over T in [2, t_max], K in [1, T-1]; ties go
    to smaller T, then smaller K."""
    if t_max < 2:
        raise UsageError("t_max must be >= 2")
    best: Optional[ShapeChoice] = None
    for T in range(2, t_max + 1):
        for K in range(1, T):
            cost = total_cost(profile, params, T, K)
            if best is None or cost < best.predicted_cost:
                best = ShapeChoice(T, K, cost)
    return best


def should_retune(
    previous: WorkloadProfile, current: WorkloadProfile, threshold: float = 0.2
) -> bool:
    """Strict inequality: a distance exactly at the threshold does not
    trigger."""
    return previous.l1_distance(current) > threshold


class Controller:
    """Windowed retune driver; one JSON line appended per tick."""

    def __init__(
        self,
        log_path: str | None = None,
        window_min: int = 1000,
        threshold: float = 0.2,
        t_max: int = 16,
    ):
        self.log_path = log_path
        self.window_min = window_min
        self.threshold = threshold
        self.t_max = t_max
        self.last_retune_profile: Optional[WorkloadProfile] = None
        self.ticks = 0

    def _log(self, record: dict) -> None:
        if self.log_path is None:
            return
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record) + "\n")

    def tick(
        self, window: OpStats, params: CostModelParams
    ) -> Optional[ShapeChoice]:
        """Evaluate one window; returns a shape to apply, or None."""
        self.ticks += 1
        total = window.total_ops()
        record: dict = {"tick": self.ticks, "ops": total}
        if total < self.window_min:
            record["action"] = "underfilled"
            self._log(record)
            return None
        profile = WorkloadProfile.from_stats(window)
        record["profile"] = profile.as_dict()
        if self.last_retune_profile is not None and not should_retune(
            self.last_retune_profile, profile, self.threshold
        ):
            record["action"] = "stable"
            self._log(record)
            return None
        choice = optimize(profile, params.validate(), self.t_max)
        self.last_retune_profile = profile
        record["action"] = "retune"
        record["T"] = choice.T
        record["K"] = choice.K
        record["predicted_cost"] = choice.predicted_cost
        self._log(record)
        return choice
