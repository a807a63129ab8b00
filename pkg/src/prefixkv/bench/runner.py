"""Benchmark driver: staged requests against a backend, JSON report out.

Per request: probe for the longest stored prefix, fetch it, synthesize the
miss suffix, store the full chain. Maintenance runs between request groups
the way a serving deployment would schedule it off the request path.
"""
from __future__ import annotations

import json
import time

import numpy as np

from ..engine import Engine
from .workload import StagePlan, gen_request, synth_payloads, warmup

MAINTENANCE_EVERY = 50


def run_bench(plan: StagePlan, backend, maintenance_every: int = MAINTENANCE_EVERY) -> dict:
    rng = np.random.Generator(np.random.PCG64(plan.seed))
    t_start = time.perf_counter()
    warm = warmup(backend, plan, rng)
    warmup_seconds = time.perf_counter() - t_start
    backend.reset_window()

    stages = []
    for stage_idx, expected in enumerate(plan.stages):
        hit_sum = 0.0
        matched_blocks_total = 0
        stored_total = 0
        win_before = backend.lifetime.copy()
        t_stage = time.perf_counter()
        for r in range(plan.requests_per_stage):
            tokens = gen_request(expected, warm.pool, rng, plan)
            probe = backend.probe(tokens)
            if probe.matched_blocks:
                backend.get_batch(tokens, probe.matched_blocks)
            tensors = synth_payloads(tokens, plan)
            stored_total += backend.put_batch(tokens, tensors)
            hit_sum += probe.matched_tokens / plan.prompt_tokens
            matched_blocks_total += probe.matched_blocks
            if (r + 1) % maintenance_every == 0:
                backend.maintenance_tick()
        backend.maintenance_tick()
        after = backend.lifetime
        stages.append(
            {
                "stage": stage_idx,
                "expected_hit_rate": expected,
                "measured_hit_rate": hit_sum / plan.requests_per_stage,
                "requests": plan.requests_per_stage,
                "matched_blocks": matched_blocks_total,
                "blocks_stored": stored_total,
                "bytes_written": after.bytes_written - win_before.bytes_written,
                "bytes_read": after.bytes_read - win_before.bytes_read,
                "file_count": backend.file_count(),
                "seconds": time.perf_counter() - t_stage,
                "avg_put_ms": _avg_ms(after.put_seconds - win_before.put_seconds,
                                      plan.requests_per_stage),
                "avg_probe_ms": _avg_ms(after.probe_seconds - win_before.probe_seconds,
                                        plan.requests_per_stage),
                "avg_get_ms": _avg_ms(after.get_seconds - win_before.get_seconds,
                                      plan.requests_per_stage),
            }
        )

    report = {
        "backend": "lsm" if isinstance(backend, Engine) else "fpo",
        "plan": plan.as_dict(),
        "warmup": {
            "tokens": warm.total_tokens,
            "sequences": len(warm.pool),
            "blocks_stored": warm.blocks_stored,
            "seconds": warmup_seconds,
        },
        "stages": stages,
        "totals": {
            "seconds": time.perf_counter() - t_start,
            "bytes_written": backend.lifetime.bytes_written,
            "bytes_read": backend.lifetime.bytes_read,
            "file_count": backend.file_count(),
            "tensor_bytes_during_index_compaction": getattr(
                backend, "tensor_bytes_during_index_compaction", 0
            ),
        },
    }
    if isinstance(backend, Engine):
        report["controller"] = _controller_trail(backend)
    return report


def _avg_ms(seconds: float, n: int) -> float:
    return 1000.0 * seconds / n if n else 0.0


def _controller_trail(engine: Engine) -> list[dict]:
    if engine.controller is None or engine.controller.log_path is None:
        return []
    try:
        with open(engine.controller.log_path, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except FileNotFoundError:
        return []


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
