"""Line-protocol bridge exposing the engine to foreign-language bindings.

One JSON object per line on stdin, one per line on stdout. Tensor payloads
travel base64-encoded; token sequences as integer arrays. The bridge is
stateless glue over one engine instance: every durability and concurrency
contract is the engine's.

Request:  {"id": 1, "op": "open", "dir": "/path", "config": {...}}
          {"id": 2, "op": "put_batch", "tokens": [...], "tensors_b64": [...]}
          {"id": 3, "op": "probe", "tokens": [...]}
          {"id": 4, "op": "get_batch", "tokens": [...], "upto": 3}
          {"id": 5, "op": "maintenance_tick"}
          {"id": 6, "op": "stats"}
          {"id": 7, "op": "close"}
Response: {"id": 1, "ok": true, "result": ...}
          {"id": 2, "ok": false, "error": {"type": "...", "message": "..."}}
"""
from __future__ import annotations

import base64
import dataclasses
import json
import sys

import numpy as np

from .config import EngineConfig, parse_config
from .engine import Engine
from .errors import PrefixKvError, UsageError


class Bridge:
    def __init__(self):
        self.engine: Engine | None = None

    def _require_engine(self) -> Engine:
        if self.engine is None:
            raise UsageError("no engine open (call open first)")
        return self.engine

    def handle(self, req: dict):
        op = req.get("op")
        if op == "open":
            if self.engine is not None:
                raise UsageError("engine already open on this bridge")
            config = None
            if req.get("config"):
                text = "\n".join(f"{k} = {v}" for k, v in req["config"].items())
                config = parse_config(text, EngineConfig())
            self.engine = Engine(req["dir"], config)
            return {"dir": req["dir"]}
        if op == "close":
            engine = self._require_engine()
            engine.close()
            self.engine = None
            return {}
        engine = self._require_engine()
        if op == "put_batch":
            tokens = np.asarray(req["tokens"], dtype=np.uint32)
            tensors = [base64.b64decode(t) for t in req["tensors_b64"]]
            return {"stored": engine.put_batch(tokens, tensors)}
        if op == "probe":
            res = engine.probe(np.asarray(req["tokens"], dtype=np.uint32))
            return {
                "matched_blocks": res.matched_blocks,
                "matched_tokens": res.matched_tokens,
            }
        if op == "get_batch":
            payloads = engine.get_batch(
                np.asarray(req["tokens"], dtype=np.uint32), req["upto"]
            )
            return {
                "tensors_b64": [base64.b64encode(p).decode() for p in payloads]
            }
        if op == "maintenance_tick":
            report = engine.maintenance_tick()
            out = dataclasses.asdict(report)
            out.pop("details", None)
            return out
        if op == "stats":
            return dataclasses.asdict(engine.snapshot_stats())
        raise UsageError(f"unknown op {op!r}")


def main() -> int:
    bridge = Bridge()
    out = sys.stdout
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req_id = None
        try:
            req = json.loads(line)
            req_id = req.get("id")
            result = bridge.handle(req)
            out.write(json.dumps({"id": req_id, "ok": True, "result": result}) + "\n")
        except PrefixKvError as exc:
            out.write(json.dumps({
                "id": req_id, "ok": False,
                "error": {"type": type(exc).__name__, "message": str(exc)},
            }) + "\n")
        except Exception as exc:  # malformed request or internal failure
            out.write(json.dumps({
                "id": req_id, "ok": False,
                "error": {"type": "InternalError", "message": repr(exc)},
            }) + "\n")
        out.flush()
    if bridge.engine is not None:
        bridge.engine.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
