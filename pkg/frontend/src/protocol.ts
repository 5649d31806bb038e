// Wire protocol spoken with the simulator service: one JSON object per
// websocket text frame, tagged with "type". Field names follow the server's
// documentation; v_proto is the protocol version.

export const PROTOCOL_VERSION = 1;
export const V_MAX = 0.5;   // m/s per axis
export const W_MAX = 0.15;  // rad/s per axis

export interface Heatmap {
  nx: number;
  ny: number;
  x0: number;
  x1: number;
  y0: number;
  y1: number;
  values: number[][]; // row-major, values[iy][ix], phi in [0, 1]
}

export interface StateFrame {
  type: "state";
  t: number;
  drones: number[][]; // [x, y, z, yaw, pitch] per drone
  p_bar: number[];
  dir_bar: number[];
  J: number;
  heatmap: Heatmap;
  events: string[];
}

export interface HelloFrame {
  type: "hello";
  n: number;
  dt: number;
  duration: number;
  stealth_mode: string;
  flight_box: number[][];
  target_bounds: number[][];
  grid_counts: number[];
}

export interface CommandFrame {
  type: "command";
  v_proto: number;
  engaged: boolean;
  v: [number, number, number];
  w: [number, number]; // (pitch_rate, yaw_rate)
  client_time: number;
}

export type ServerFrame = StateFrame | HelloFrame;

export function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

export function zeroCommand(now: number = Date.now()): CommandFrame {
  return {
    type: "command",
    v_proto: PROTOCOL_VERSION,
    engaged: false,
    v: [0, 0, 0],
    w: [0, 0],
    client_time: now,
  };
}

export function encodeCommand(frame: CommandFrame): string {
  return JSON.stringify(frame);
}

// Parse a server frame; returns null for anything malformed rather than
// throwing (a bad frame should never take the cockpit down).
export function decodeServerFrame(text: string): ServerFrame | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (d.type === "hello" && typeof d.n === "number" && typeof d.dt === "number") {
    return d as unknown as HelloFrame;
  }
  if (
    d.type === "state" &&
    typeof d.t === "number" &&
    Array.isArray(d.drones) &&
    Array.isArray(d.p_bar) &&
    typeof d.J === "number"
  ) {
    return d as unknown as StateFrame;
  }
  return null;
}
