// Press-to-engage command input: the pointer-down position on the drag pad
// becomes a temporary origin, displacement from it maps to translational
// velocity; the joystick's vertical/horizontal axes map to pitch/yaw rates,
// and a separate slider supplies vertical velocity.

import { CommandFrame, PROTOCOL_VERSION, V_MAX, W_MAX, clamp, zeroCommand } from "./protocol.js";

export interface UiCommandState {
  engaged: boolean;
  pressOrigin: [number, number];   // pad coordinates captured at engage
  currentOffset: [number, number]; // displacement since engage, pad units (+x right, +y up)
  joystick: [number, number];      // [horizontal, vertical] in [-1, 1]^2
  zAxis: number;                   // vertical slider in [-1, 1]
  dragRadius: number;              // pad units mapping to full speed
}

export function idleState(dragRadius = 80): UiCommandState {
  return {
    engaged: false,
    pressOrigin: [0, 0],
    currentOffset: [0, 0],
    joystick: [0, 0],
    zAxis: 0,
    dragRadius,
  };
}

// Map the UI state to a command frame. Everything is clamped client-side
// as a courtesy; the server re-clamps regardless.
export function mapInput(
  ui: UiCommandState,
  scaleV: number = V_MAX,
  scaleW: number = W_MAX,
  now: number = Date.now(),
): CommandFrame {
  if (!ui.engaged) {
    return zeroCommand(now);
  }
  const nx = clamp(ui.currentOffset[0] / ui.dragRadius, -1, 1);
  const ny = clamp(ui.currentOffset[1] / ui.dragRadius, -1, 1);
  const nz = clamp(ui.zAxis, -1, 1);
  const jh = clamp(ui.joystick[0], -1, 1);
  const jv = clamp(ui.joystick[1], -1, 1);
  return {
    type: "command",
    v_proto: PROTOCOL_VERSION,
    engaged: true,
    v: [nx * scaleV, ny * scaleV, nz * scaleV],
    w: [jv * scaleW, jh * scaleW], // (pitch_rate, yaw_rate)
    client_time: now,
  };
}

// Bounded-rate command emitter: at most maxHz frames while engaged, one
// zero frame on disengage, then silence until re-engaged.
export class CommandEmitter {
  private lastSent = -Infinity;
  private wasEngaged = false;
  readonly minIntervalMs: number;

  constructor(
    private readonly send: (frame: CommandFrame) => void,
    maxHz: number = 20,
    private readonly now: () => number = () => performance.now(),
  ) {
    this.minIntervalMs = 1000 / Math.min(maxHz, 30);
  }

  poll(ui: UiCommandState): void {
    const t = this.now();
    if (ui.engaged) {
      if (t - this.lastSent >= this.minIntervalMs) {
        this.send(mapInput(ui, V_MAX, W_MAX, t));
        this.lastSent = t;
      }
      this.wasEngaged = true;
    } else if (this.wasEngaged) {
      this.send(zeroCommand(t));
      this.wasEngaged = false;
      this.lastSent = t;
    }
  }
}
