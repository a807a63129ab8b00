"""Engine configuration, loadable from a flat TOML-style key=value file.

Example::

    # engine.conf
    block_tokens = 64
    memtable_bytes = 1048576
    size_ratio = 4
    runs_per_level = 1
    codec = "deflate"
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .codec import CODEC_DEFLATE, CODEC_RAW
from .errors import UsageError

_CODEC_NAMES = {"raw": CODEC_RAW, "deflate": CODEC_DEFLATE}


@dataclass(frozen=True)
class EngineConfig:
    block_tokens: int = 64
    memtable_bytes: int = 1 << 20
    size_ratio: int = 4
    runs_per_level: int = 1
    bloom_bits_per_key: int = 10
    file_cap: int = 256 << 20
    max_tensor_files: int = 64
    codec_id: int = CODEC_RAW
    controller_enabled: bool = True
    controller_window_min: int = 1000
    controller_threshold: float = 0.2
    controller_t_max: int = 16

    def validate(self) -> "EngineConfig":
        if self.block_tokens < 1:
            raise UsageError("block_tokens must be >= 1")
        if self.size_ratio < 2:
            raise UsageError("size_ratio must be >= 2")
        if not 1 <= self.runs_per_level <= self.size_ratio - 1:
            raise UsageError("runs_per_level must be in [1, size_ratio-1]")
        if self.codec_id not in (CODEC_RAW, CODEC_DEFLATE):
            raise UsageError(f"unknown codec id {self.codec_id}")
        if self.memtable_bytes < 4096:
            raise UsageError("memtable_bytes must be >= 4096")
        return self


def _coerce(raw: str, target_type: type):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        raw = raw[1:-1]
    if target_type is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise UsageError(f"bad boolean value {raw!r}")
    if target_type is int:
        return int(raw, 0)
    if target_type is float:
        return float(raw)
    return raw


def parse_config(text: str, base: EngineConfig | None = None) -> EngineConfig:
    cfg = base or EngineConfig()
    by_name = {f.name: f for f in fields(EngineConfig)}
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key == "codec":
            name = _coerce(raw, str)
            if name not in _CODEC_NAMES:
                raise UsageError(f"config line {lineno}: unknown codec {name!r}")
            updates["codec_id"] = _CODEC_NAMES[name]
            continue
        f = by_name.get(key)
        if f is None:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        updates[key] = _coerce(raw, f.type if isinstance(f.type, type) else
                               {"int": int, "float": float, "bool": bool, "str": str}[f.type])
    return replace(cfg, **updates).validate()


def load_config(path: str, base: EngineConfig | None = None) -> EngineConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read(), base)


def dump_config(cfg: EngineConfig) -> str:
    lines = []
    for f in fields(EngineConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
