/**
 * BoundEngine: the six-call engine surface over a child-process bridge.
 *
 * Marshals token arrays as JSON integers and tensors as base64; the pipe
 * transport rules out zero-copy, so payloads are copied at the boundary.
 * All storage semantics (durability, first-write-wins, probe monotonicity)
 * are the native engine's; this class is glue only.
 */
import { type ChildProcessByStdio, spawn } from "node:child_process";
import { createInterface, type Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

type BridgeProcess = ChildProcessByStdio<Writable, Readable, null>;

import type {
  BridgeResponse,
  EngineOptions,
  EngineStats,
  MaintenanceReport,
  ProbeResult,
} from "./protocol.js";

export class EngineError extends Error {
  readonly kind: string;

  constructor(kind: string, message: string) {
    super(message);
    this.kind = kind;
    this.name = `EngineError(${kind})`;
  }
}

interface Pending {
  resolve: (value: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

export class BoundEngine {
  private child: BridgeProcess | null = null;
  private reader: Interface | null = null;
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private opened = false;

  constructor(private readonly python: string = "python3") {}

  private ensureChild(): BridgeProcess {
    if (this.child !== null) return this.child;
    const child = spawn(this.python, ["-m", "prefixkv.stdio_bridge"], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    this.reader = createInterface({ input: child.stdout });
    this.reader.on("line", (line) => this.dispatch(line));
    child.on("exit", () => {
      for (const p of this.pending.values()) {
        p.reject(new EngineError("BridgeExit", "bridge process exited"));
      }
      this.pending.clear();
    });
    this.child = child;
    return child;
  }

  private dispatch(line: string): void {
    let msg: BridgeResponse;
    try {
      msg = JSON.parse(line) as BridgeResponse;
    } catch {
      return;
    }
    const waiter = msg.id === null ? undefined : this.pending.get(msg.id);
    if (waiter === undefined) return;
    this.pending.delete(msg.id as number);
    if (msg.ok) {
      waiter.resolve(msg.result ?? {});
    } else {
      const err = msg.error ?? { type: "InternalError", message: "unknown" };
      waiter.reject(new EngineError(err.type, err.message));
    }
  }

  private call(
    op: string,
    fields: Record<string, unknown> = {},
  ): Promise<Record<string, unknown>> {
    const child = this.ensureChild();
    const id = this.nextId++;
    const payload = JSON.stringify({ id, op, ...fields });
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      child.stdin.write(payload + "\n");
    });
  }

  async open(dir: string, options?: EngineOptions): Promise<void> {
    if (this.opened) {
      throw new EngineError("UsageError", "engine handle already open");
    }
    await this.call("open", { dir, config: options ?? null });
    this.opened = true;
  }

  private requireOpen(): void {
    if (!this.opened) {
      throw new EngineError("UsageError", "engine handle is not open");
    }
  }

  async putBatch(
    tokens: Uint32Array | number[],
    tensors: Uint8Array[],
  ): Promise<number> {
    this.requireOpen();
    const result = await this.call("put_batch", {
      tokens: Array.from(tokens),
      tensors_b64: tensors.map((t) => Buffer.from(t).toString("base64")),
    });
    return result.stored as number;
  }

  async probe(tokens: Uint32Array | number[]): Promise<ProbeResult> {
    this.requireOpen();
    const result = await this.call("probe", { tokens: Array.from(tokens) });
    return {
      matchedBlocks: result.matched_blocks as number,
      matchedTokens: result.matched_tokens as number,
    };
  }

  async getBatch(
    tokens: Uint32Array | number[],
    uptoBlocks: number,
  ): Promise<Uint8Array[]> {
    this.requireOpen();
    const result = await this.call("get_batch", {
      tokens: Array.from(tokens),
      upto: uptoBlocks,
    });
    return (result.tensors_b64 as string[]).map(
      (b) => new Uint8Array(Buffer.from(b, "base64")),
    );
  }

  async maintenanceTick(): Promise<MaintenanceReport> {
    this.requireOpen();
    const r = await this.call("maintenance_tick");
    return {
      compactionRunsMerged: r.compaction_runs_merged as number,
      compactionBytesRewritten: r.compaction_bytes_rewritten as number,
      tensorFilesBefore: r.tensor_files_before as number,
      tensorFilesAfter: r.tensor_files_after as number,
      tensorRecordsRemapped: r.tensor_records_remapped as number,
      retunedShape: (r.retuned_shape ?? null) as [number, number] | null,
    };
  }

  async stats(): Promise<EngineStats> {
    this.requireOpen();
    const r = await this.call("stats");
    return {
      writes: r.writes as number,
      pointReadsOk: r.point_reads_ok as number,
      rangeScans: r.range_scans as number,
      zeroProbes: r.zero_probes as number,
      bytesWritten: r.bytes_written as number,
      bytesRead: r.bytes_read as number,
    };
  }

  async close(): Promise<void> {
    this.requireOpen();
    await this.call("close");
    this.opened = false;
    this.child?.stdin.end();
    this.reader?.close();
    this.child = null;
    this.reader = null;
  }
}
