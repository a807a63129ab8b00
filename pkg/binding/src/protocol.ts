/** Wire types for the stdio line protocol. */

export interface BridgeRequest {
  id: number;
  op: string;
  [key: string]: unknown;
}

export interface BridgeError {
  type: string;
  message: string;
}

export interface BridgeResponse {
  id: number | null;
  ok: boolean;
  result?: Record<string, unknown>;
  error?: BridgeError;
}

export interface ProbeResult {
  matchedBlocks: number;
  matchedTokens: number;
}

export interface MaintenanceReport {
  compactionRunsMerged: number;
  compactionBytesRewritten: number;
  tensorFilesBefore: number;
  tensorFilesAfter: number;
  tensorRecordsRemapped: number;
  retunedShape: [number, number] | null;
}

export interface EngineStats {
  writes: number;
  pointReadsOk: number;
  rangeScans: number;
  zeroProbes: number;
  bytesWritten: number;
  bytesRead: number;
}

/** Engine configuration keys accepted by open(); values mirror the
 * key=value config file of the native engine. */
export interface EngineOptions {
  block_tokens?: number;
  memtable_bytes?: number;
  size_ratio?: number;
  runs_per_level?: number;
  bloom_bits_per_key?: number;
  file_cap?: number;
  max_tensor_files?: number;
  controller_enabled?: boolean;
  [key: string]: number | boolean | string | undefined;
}
