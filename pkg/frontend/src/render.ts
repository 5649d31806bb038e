// Canvas drawing for the cockpit. Everything rendered comes straight from
// server frames; the functions take a minimal context interface so tests
// can replay recorded runs against a recording mock.

import { heatColor } from "./heatmap.js";
import { HelloFrame, StateFrame } from "./protocol.js";

export const DRONE_RADIUS = 6;
export const AVG_RADIUS = 10;
export const HEADING_LEN = 16;
export const ARROW_LEN = 26;

// The subset of CanvasRenderingContext2D the renderer needs.
export interface Ctx {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface Layout {
  width: number;
  height: number;
  mapRect: { x: number; y: number; w: number; h: number };
  stripRect: { x: number; y: number; w: number; h: number };
  gaugeRect: { x: number; y: number; w: number; h: number };
  world: { x0: number; x1: number; y0: number; y1: number };
}

export function makeLayout(width: number, height: number, hello: HelloFrame): Layout {
  const margin = 10;
  const stripH = Math.max(60, height * 0.16);
  const gaugeW = Math.max(70, width * 0.13);
  const [bx, by] = hello.flight_box;
  const [tx, ty] = hello.target_bounds;
  const x0 = Math.min(bx[0], tx[0]);
  const x1 = Math.max(bx[1], tx[1]);
  const y0 = Math.min(by[0], ty[0]);
  const y1 = Math.max(by[1], ty[1]);
  return {
    width,
    height,
    mapRect: { x: margin, y: margin, w: width - gaugeW - 3 * margin, h: height - stripH - 3 * margin },
    stripRect: { x: margin, y: height - stripH - margin, w: width - 2 * margin, h: stripH },
    gaugeRect: { x: width - gaugeW - margin, y: margin, w: gaugeW, h: height - stripH - 3 * margin },
    world: { x0, x1, y0, y1 },
  };
}

// Top-down view: world x rightward, world y up-screen.
export function worldToScreen(layout: Layout, x: number, y: number): [number, number] {
  const { mapRect, world } = layout;
  const sx = mapRect.x + ((x - world.x0) / (world.x1 - world.x0)) * mapRect.w;
  const sy = mapRect.y + mapRect.h - ((y - world.y0) / (world.y1 - world.y0)) * mapRect.h;
  return [sx, sy];
}

function drawHeatmap(ctx: Ctx, layout: Layout, frame: StateFrame): void {
  const hm = frame.heatmap;
  if (!hm || !hm.values) return;
  const dx = (hm.x1 - hm.x0) / hm.nx;
  const dy = (hm.y1 - hm.y0) / hm.ny;
  ctx.globalAlpha = 0.45;
  for (let iy = 0; iy < hm.ny; iy++) {
    for (let ix = 0; ix < hm.nx; ix++) {
      const [sx, sy] = worldToScreen(layout, hm.x0 + ix * dx, hm.y0 + (iy + 1) * dy);
      const [sx1, sy1] = worldToScreen(layout, hm.x0 + (ix + 1) * dx, hm.y0 + iy * dy);
      ctx.fillStyle = heatColor(hm.values[iy][ix]);
      ctx.fillRect(sx, sy, sx1 - sx, sy1 - sy);
    }
  }
  ctx.globalAlpha = 1.0;
}

function drawFlightBox(ctx: Ctx, layout: Layout, hello: HelloFrame): void {
  const [bx, by] = hello.flight_box;
  const [x, y] = worldToScreen(layout, bx[0], by[1]);
  const [x1, y1] = worldToScreen(layout, bx[1], by[0]);
  ctx.strokeStyle = "#8af";
  ctx.lineWidth = 1.5;
  ctx.strokeRect(x, y, x1 - x, y1 - y);
}

function drawDrone(ctx: Ctx, layout: Layout, pose: number[]): void {
  const [sx, sy] = worldToScreen(layout, pose[0], pose[1]);
  const yaw = pose[3];
  ctx.fillStyle = "#ffd24a";
  ctx.beginPath();
  ctx.arc(sx, sy, DRONE_RADIUS, 0, 2 * Math.PI);
  ctx.fill();
  ctx.strokeStyle = "#ffd24a";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(sx, sy);
  ctx.lineTo(sx + HEADING_LEN * Math.cos(yaw), sy - HEADING_LEN * Math.sin(yaw));
  ctx.stroke();
}

function drawAverage(ctx: Ctx, layout: Layout, frame: StateFrame): void {
  const [sx, sy] = worldToScreen(layout, frame.p_bar[0], frame.p_bar[1]);
  ctx.strokeStyle = "#4ef08a";
  ctx.lineWidth = 2.5;
  ctx.beginPath();
  ctx.arc(sx, sy, AVG_RADIUS, 0, 2 * Math.PI);
  ctx.stroke();
  const dx = frame.dir_bar[0];
  const dy = frame.dir_bar[1];
  const horiz = Math.hypot(dx, dy);
  if (horiz > 1e-6) {
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(sx + (ARROW_LEN * dx) / horiz, sy - (ARROW_LEN * dy) / horiz);
    ctx.stroke();
  } else {
    // axis nearly vertical: mark it with a dot instead of an arrow
    ctx.fillStyle = "#4ef08a";
    ctx.beginPath();
    ctx.arc(sx, sy, 2, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawGauges(ctx: Ctx, layout: Layout, hello: HelloFrame, frame: StateFrame): void {
  const g = layout.gaugeRect;
  const zRange = hello.flight_box[2];
  ctx.strokeStyle = "#555";
  ctx.lineWidth = 1;
  ctx.strokeRect(g.x, g.y, g.w, g.h);
  ctx.fillStyle = "#ccc";
  ctx.font = "10px sans-serif";
  ctx.fillText("alt / pitch", g.x + 4, g.y + 12);
  const n = frame.drones.length;
  const barW = g.w / (2 * n + 1);
  for (let i = 0; i < n; i++) {
    const z = frame.drones[i][2];
    const pitch = frame.drones[i][4];
    const zFrac = (z - zRange[0]) / (zRange[1] - zRange[0]);
    const pFrac = pitch / (Math.PI / 2);
    const x = g.x + barW * (2 * i + 0.75);
    ctx.fillStyle = "#ffd24a";
    ctx.fillRect(x, g.y + g.h - zFrac * (g.h - 22), barW * 0.8, zFrac * (g.h - 22));
    ctx.fillStyle = "#6ac";
    ctx.fillRect(x + barW * 0.9, g.y + g.h - pFrac * (g.h - 22), barW * 0.4, pFrac * (g.h - 22));
  }
}

function drawObjectiveStrip(ctx: Ctx, layout: Layout, history: Array<[number, number]>): void {
  const s = layout.stripRect;
  ctx.strokeStyle = "#555";
  ctx.lineWidth = 1;
  ctx.strokeRect(s.x, s.y, s.w, s.h);
  ctx.fillStyle = "#ccc";
  ctx.font = "10px sans-serif";
  const last = history.length ? history[history.length - 1][1] : NaN;
  ctx.fillText(`J = ${last.toFixed(4)}`, s.x + 6, s.y + 12);
  if (history.length < 2) return;
  const t0 = history[0][0];
  const t1 = history[history.length - 1][0];
  const span = Math.max(t1 - t0, 1e-9);
  ctx.strokeStyle = "#4ef08a";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  history.forEach(([t, j], i) => {
    const x = s.x + ((t - t0) / span) * s.w;
    const y = s.y + s.h - j * s.h;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

export interface SceneStatus {
  connected: boolean;
  stale: boolean;
}

export function renderScene(
  ctx: Ctx,
  layout: Layout,
  hello: HelloFrame,
  frame: StateFrame | null,
  history: Array<[number, number]>,
  status: SceneStatus,
): void {
  ctx.clearRect(0, 0, layout.width, layout.height);
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, layout.width, layout.height);
  if (frame) {
    drawHeatmap(ctx, layout, frame);
    drawFlightBox(ctx, layout, hello);
    for (const pose of frame.drones) drawDrone(ctx, layout, pose);
    drawAverage(ctx, layout, frame);
    drawGauges(ctx, layout, hello, frame);
    drawObjectiveStrip(ctx, layout, history);
    ctx.fillStyle = "#ccc";
    ctx.font = "11px sans-serif";
    ctx.fillText(`t = ${frame.t.toFixed(1)} s`, layout.mapRect.x + 4, layout.mapRect.y + 14);
    if (frame.events.length) {
      ctx.fillStyle = "#f80";
      ctx.fillText(frame.events.join(" "), layout.mapRect.x + 4, layout.mapRect.y + 28);
    }
  }
  if (!status.connected || status.stale) {
    ctx.globalAlpha = 0.55;
    ctx.fillStyle = "#222";
    ctx.fillRect(0, 0, layout.width, layout.height);
    ctx.globalAlpha = 1.0;
    ctx.fillStyle = "#f66";
    ctx.font = "16px sans-serif";
    ctx.fillText(status.connected ? "stream stale" : "disconnected — reconnecting", 20, 30);
  }
}
