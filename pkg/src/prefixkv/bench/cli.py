"""Command-line interface: staged benchmark runs, store inspection, forced
maintenance, and the kernel micro-benchmark."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from ..baseline_fpo import FileBackend
from ..codec import CODEC_DEFLATE, CODEC_RAW
from ..config import EngineConfig, load_config
from ..engine import Engine
from .runner import run_bench, write_report
from .workload import DEFAULT_STAGES, StagePlan


def _add_run(sub):
    p = sub.add_parser("run", help="run the staged workload against a backend")
    p.add_argument("--backend", choices=("lsm", "fpo"), default="lsm")
    p.add_argument("--stages", default=",".join(str(s) for s in DEFAULT_STAGES),
                   help="comma-separated expected hit rates")
    p.add_argument("--requests", type=int, default=200, help="requests per stage")
    p.add_argument("--prompt-tokens", type=int, default=1024)
    p.add_argument("--block-tokens", type=int, default=64)
    p.add_argument("--bytes-per-token", type=int, default=1024)
    p.add_argument("--warmup-tokens", type=int, default=1_000_000)
    p.add_argument("--entropy", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--dir", required=True, help="backend directory")
    p.add_argument("--out", default="report.json", help="JSON report path")
    p.add_argument("--codec", choices=("raw", "deflate"), default="raw")
    p.add_argument("--index-buffer", type=int, default=None,
                   help="memtable capacity in bytes")
    p.add_argument("--file-cap", type=int, default=None)
    p.add_argument("--merge-threshold", type=int, default=None,
                   help="tensor file count that triggers merging")
    p.add_argument("--no-controller", action="store_true")
    p.add_argument("--config", default=None, help="key=value config file")


def _cmd_run(args) -> int:
    cfg = EngineConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {
        "block_tokens": args.block_tokens,
        "codec_id": CODEC_DEFLATE if args.codec == "deflate" else CODEC_RAW,
    }
    if args.index_buffer is not None:
        overrides["memtable_bytes"] = args.index_buffer
    if args.file_cap is not None:
        overrides["file_cap"] = args.file_cap
    if args.merge_threshold is not None:
        overrides["max_tensor_files"] = args.merge_threshold
    if args.no_controller:
        overrides["controller_enabled"] = False
    from dataclasses import replace

    cfg = replace(cfg, **overrides).validate()

    plan = StagePlan(
        stages=tuple(float(s) for s in args.stages.split(",")),
        requests_per_stage=args.requests,
        prompt_tokens=args.prompt_tokens,
        block_tokens=args.block_tokens,
        bytes_per_token=args.bytes_per_token,
        entropy=args.entropy,
        seed=args.seed,
        warmup_tokens=args.warmup_tokens,
    )
    backend = (
        Engine(args.dir, cfg) if args.backend == "lsm" else FileBackend(args.dir, cfg)
    )
    try:
        report = run_bench(plan, backend)
    finally:
        backend.close()
    write_report(report, args.out)
    for stage in report["stages"]:
        print(
            f"stage {stage['stage']}: expected {stage['expected_hit_rate']:.2f} "
            f"measured {stage['measured_hit_rate']:.3f} "
            f"files {stage['file_count']}"
        )
    print(f"report written to {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    from ..lsm.manifest import load as load_manifest

    index_dir = os.path.join(args.dir, "index")
    m = load_manifest(index_dir) if os.path.isdir(index_dir) else None
    if m is None:
        print(f"{args.dir}: no LSM manifest (file-per-object dir or empty)")
        kv = [n for n in os.listdir(args.dir) if n.endswith(".kv")]
        if kv:
            print(f"  .kv files: {len(kv)}")
        return 0
    cur, tgt = m.current_shape, m.target_shape
    print(f"shape current T={cur.T} K={cur.K} M={cur.M} bloom={cur.bloom_bits_per_key}")
    if tgt != cur:
        print(f"shape target  T={tgt.T} K={tgt.K} (lazy transition in progress)")
    print(f"wal generation {m.wal_gen}, next run id {m.next_run_id}")
    for i, level in enumerate(m.levels):
        total = sum(r.bytes for r in level)
        entries = sum(r.entry_count for r in level)
        print(f"level {i}: {len(level)} run(s), {entries} entries, {total} bytes")
    tdir = os.path.join(args.dir, "tensors")
    if os.path.isdir(tdir):
        files = [n for n in os.listdir(tdir) if n.endswith(".dat")]
        size = sum(os.path.getsize(os.path.join(tdir, n)) for n in files)
        print(f"tensor log: {len(files)} file(s), {size} bytes")
    log_path = os.path.join(args.dir, "controller_log.jsonl")
    if os.path.exists(log_path):
        with open(log_path, "r", encoding="utf-8") as f:
            lines = f.readlines()
        print(f"controller: {len(lines)} tick(s); last: {lines[-1].strip()}")
    return 0


def _cmd_compact(args) -> int:
    engine = Engine(args.dir)
    try:
        rounds = 0
        while True:
            report = engine.maintenance_tick()
            rounds += 1
            if (
                report.compaction_runs_merged == 0
                and report.compaction_run_moves == 0
                and report.tensor_records_remapped == 0
            ):
                break
        print(f"maintenance reached fixpoint in {rounds} round(s)")
        print(f"level run counts: {engine.index.level_run_counts()}")
        print(f"tensor files: {engine.log.file_count()}")
    finally:
        engine.close()
    return 0


def _cmd_kernels(args) -> int:
    """Throughput of the compiled kernels against the pure fallbacks."""
    import numpy as np

    from .. import _kernels_py, kernels

    data = np.random.default_rng(0).integers(
        0, 256, size=args.mib << 20, dtype=np.uint8
    ).tobytes()
    small = data[: 64 << 10]
    print(f"kernel implementation selected at import: {kernels.IMPL}")
    for name, fast, slow, payload in (
        ("crc32c", kernels.crc32c, _kernels_py.crc32c, data),
        ("fnv1a64", kernels.fnv1a64, _kernels_py.fnv1a64, data),
    ):
        if fast is not slow:
            mbs = _throughput(fast, payload)
            print(f"{name:10s} compiled: {mbs:9.1f} MiB/s")
        mbs = _throughput(slow, payload if fast is slow else small)
        print(f"{name:10s} pure:     {mbs:9.1f} MiB/s")
    return 0


def _throughput(fn, data: bytes) -> float:
    t0 = time.perf_counter()
    fn(data)
    dt = time.perf_counter() - t0
    return len(data) / (1 << 20) / dt


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bench", description="prefix KV-cache store benchmark harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    p = sub.add_parser("inspect", help="print store structure summary")
    p.add_argument("--dir", required=True)
    p = sub.add_parser("compact", help="drive maintenance to fixpoint")
    p.add_argument("--dir", required=True)
    p = sub.add_parser("kernels", help="compare compiled vs pure kernels")
    p.add_argument("--mib", type=int, default=64, help="payload size in MiB")

    args = parser.parse_args(argv)
    handler = {
        "run": _cmd_run,
        "inspect": _cmd_inspect,
        "compact": _cmd_compact,
        "kernels": _cmd_kernels,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
