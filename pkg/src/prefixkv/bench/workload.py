"""Staged synthetic workload: shared prefixes drawn from a warm pool.

Each request at expected hit rate ``h`` takes the first round(h * P / bt)
blocks of a random pool sequence and pads with fresh random tokens, so the
achievable hit rate equals ``h`` up to one block quantum. "Computation" of
a cache miss is payload synthesis: deterministic bytes derived from the
block's tokens, with an entropy knob controlling compressibility.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import keycodec

DEFAULT_STAGES = (0.2, 0.3, 0.5, 0.7, 0.5, 0.3, 0.1, 0.3, 0.5, 0.7)


@dataclass(frozen=True)
class StagePlan:
    stages: tuple[float, ...] = DEFAULT_STAGES
    requests_per_stage: int = 200
    prompt_tokens: int = 1024
    block_tokens: int = 64
    bytes_per_token: int = 1024
    entropy: float = 0.25  # fraction of distinct random bytes per payload
    seed: int = 42
    warmup_tokens: int = 1_000_000

    def __post_init__(self):
        if any(not 0.0 <= h <= 1.0 for h in self.stages):
            raise ValueError("stage hit rates must lie in [0, 1]")
        if self.prompt_tokens < self.block_tokens:
            raise ValueError("prompt must cover at least one block")

    def as_dict(self) -> dict:
        return {
            "stages": list(self.stages),
            "requests_per_stage": self.requests_per_stage,
            "prompt_tokens": self.prompt_tokens,
            "block_tokens": self.block_tokens,
            "bytes_per_token": self.bytes_per_token,
            "entropy": self.entropy,
            "seed": self.seed,
            "warmup_tokens": self.warmup_tokens,
        }


def synth_block_payload(
    block: np.ndarray, bytes_per_token: int, entropy: float
) -> bytes:
    """Deterministic payload for one block, seeded by the block digest."""
    n = bytes_per_token * len(block)
    seed = keycodec.block_digest(block, len(block))
    rng = np.random.Generator(np.random.PCG64(seed))
    distinct = max(1, min(n, int(n * entropy)))
    base = rng.integers(0, 256, size=distinct, dtype=np.uint8)
    if distinct >= n:
        return base.tobytes()
    reps = -(-n // distinct)
    return np.tile(base, reps)[:n].tobytes()


def synth_payloads(
    tokens: np.ndarray, plan: StagePlan
) -> list[bytes]:
    return [
        synth_block_payload(block, plan.bytes_per_token, plan.entropy)
        for block in keycodec.chunk_tokens(tokens, plan.block_tokens)
    ]


def fresh_tokens(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.integers(0, 2**32, size=count, dtype=np.uint32)


def gen_request(
    stage_hit_rate: float, pool: list[np.ndarray], rng: np.random.Generator,
    plan: StagePlan,
) -> np.ndarray:
    """One prompt: a stored-prefix share targeting the stage hit rate."""
    P, bt = plan.prompt_tokens, plan.block_tokens
    shared_blocks = round(stage_hit_rate * P / bt)
    shared = min(shared_blocks * bt, P)
    if shared > 0 and pool:
        base = pool[int(rng.integers(len(pool)))]
        shared = min(shared, len(base))
        return np.concatenate([base[:shared], fresh_tokens(rng, P - shared)])
    return fresh_tokens(rng, P)


@dataclass
class WarmupResult:
    pool: list[np.ndarray] = field(default_factory=list)
    total_tokens: int = 0
    blocks_stored: int = 0


def warmup(backend, plan: StagePlan, rng: np.random.Generator) -> WarmupResult:
    """Populate the backend with random sequences totaling
    ``plan.warmup_tokens`` tokens; returns the shared pool."""
    result = WarmupResult()
    while result.total_tokens < plan.warmup_tokens:
        seq = fresh_tokens(rng, plan.prompt_tokens)
        result.blocks_stored += backend.put_batch(seq, synth_payloads(seq, plan))
        result.pool.append(seq)
        result.total_tokens += len(seq)
    return result
