export { BoundEngine, EngineError } from "./engine.js";
export type {
  EngineOptions,
  EngineStats,
  MaintenanceReport,
  ProbeResult,
} from "./protocol.js";
