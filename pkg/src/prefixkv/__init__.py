"""prefixkv: disk-resident KV-cache store with a prefix-ordered LSM index,
key-value separation into an append-only tensor log, and workload-adaptive
compaction."""

from .baseline_fpo import FileBackend
from .config import EngineConfig, load_config, parse_config
from .engine import Engine, MaintenanceReport, ProbeResult
from .errors import (
    CorruptionError,
    PrefixKvError,
    StaleLocationError,
    UnrecoverableError,
    UsageError,
)
from .lsm import IndexEntry, LsmIndex, LsmShape
from .stats import OpStats
from .tensor_log import TensorLocation, TensorLog

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "EngineConfig",
    "FileBackend",
    "IndexEntry",
    "LsmIndex",
    "LsmShape",
    "MaintenanceReport",
    "OpStats",
    "ProbeResult",
    "TensorLocation",
    "TensorLog",
    "PrefixKvError",
    "UsageError",
    "CorruptionError",
    "StaleLocationError",
    "UnrecoverableError",
    "load_config",
    "parse_config",
    "__version__",
]
