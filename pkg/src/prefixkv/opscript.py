"""Deterministic op scripts for cross-language binding checks.

``gen`` emits a seeded JSON op sequence; ``replay`` runs it natively and
prints each probe/get outcome; ``validate`` opens a directory produced by
some other runner (e.g. a foreign binding) and verifies every put the
script acknowledged is probe-able and byte-identical.
"""
from __future__ import annotations

import argparse
import base64
import json
import sys

import numpy as np

from .config import EngineConfig
from .engine import Engine

BLOCK_TOKENS = 8


def gen_ops(seed: int, count: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    pool = [
        rng.integers(0, 2**31, size=int(rng.integers(8, 41)), dtype=np.uint32)
        for _ in range(12)
    ]
    ops = []
    for i in range(count):
        roll = int(rng.integers(0, 10))
        pick = pool[int(rng.integers(len(pool)))]
        cut = int(rng.integers(0, len(pick) + 1))
        tokens = np.concatenate(
            [pick[:cut],
             rng.integers(0, 2**31, size=int(rng.integers(0, 9)), dtype=np.uint32)]
        ).tolist()
        if roll < 5:
            blocks = len(tokens) // BLOCK_TOKENS
            tensors = [
                base64.b64encode(
                    rng.integers(0, 256, size=64, dtype=np.uint8).tobytes()
                ).decode()
                for _ in range(blocks)
            ]
            ops.append({"op": "put_batch", "tokens": tokens, "tensors_b64": tensors})
        elif roll < 8:
            ops.append({"op": "probe", "tokens": tokens})
        elif roll < 9:
            ops.append({"op": "get_batch_probed", "tokens": tokens})
        else:
            ops.append({"op": "maintenance_tick"})
    return ops


def engine_config() -> EngineConfig:
    return EngineConfig(
        block_tokens=BLOCK_TOKENS, memtable_bytes=4096, controller_enabled=False
    )


def replay(ops: list[dict], directory: str) -> list[dict]:
    """Run the script natively; returns one outcome object per op."""
    engine = Engine(directory, engine_config())
    outcomes = []
    try:
        for op in ops:
            if op["op"] == "put_batch":
                tensors = [base64.b64decode(t) for t in op["tensors_b64"]]
                stored = engine.put_batch(
                    np.asarray(op["tokens"], dtype=np.uint32), tensors
                )
                outcomes.append({"stored": stored})
            elif op["op"] == "probe":
                res = engine.probe(np.asarray(op["tokens"], dtype=np.uint32))
                outcomes.append({"matched_blocks": res.matched_blocks})
            elif op["op"] == "get_batch_probed":
                tokens = np.asarray(op["tokens"], dtype=np.uint32)
                res = engine.probe(tokens)
                payloads = engine.get_batch(tokens, res.matched_blocks)
                outcomes.append({
                    "matched_blocks": res.matched_blocks,
                    "tensors_b64": [base64.b64encode(p).decode() for p in payloads],
                })
            else:
                engine.maintenance_tick()
                outcomes.append({"maintenance": True})
    finally:
        engine.close()
    return outcomes


def validate(ops: list[dict], directory: str) -> int:
    """Check a directory written by any runner of this script."""
    engine = Engine(directory)
    failures = 0
    try:
        stored: dict[tuple, bytes] = {}
        for op in ops:
            if op["op"] != "put_batch":
                continue
            tokens = op["tokens"]
            blocks = len(tokens) // BLOCK_TOKENS
            for d in range(1, blocks + 1):
                chain = tuple(tokens[: d * BLOCK_TOKENS])
                stored.setdefault(chain, base64.b64decode(op["tensors_b64"][d - 1]))
        for chain, payload in stored.items():
            tokens = np.asarray(chain, dtype=np.uint32)
            depth = len(chain) // BLOCK_TOKENS
            res = engine.probe(tokens)
            if res.matched_blocks < depth:
                failures += 1
                continue
            got = engine.get_batch(tokens, depth)
            if got[depth - 1] != payload:
                failures += 1
    finally:
        engine.close()
    return failures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="prefixkv.opscript")
    sub = parser.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--count", type=int, default=1000)
    r = sub.add_parser("replay")
    r.add_argument("--script", required=True)
    r.add_argument("--dir", required=True)
    v = sub.add_parser("validate")
    v.add_argument("--script", required=True)
    v.add_argument("--dir", required=True)
    args = parser.parse_args(argv)

    if args.command == "gen":
        json.dump(gen_ops(args.seed, args.count), sys.stdout)
        return 0
    with open(args.script) as f:
        ops = json.load(f)
    if args.command == "replay":
        json.dump(replay(ops, args.dir), sys.stdout)
        return 0
    failures = validate(ops, args.dir)
    if failures:
        print(f"validation failed for {failures} chains", file=sys.stderr)
        return 1
    print("validation passed", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
