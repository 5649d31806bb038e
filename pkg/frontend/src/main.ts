// Cockpit wiring: network link, render loop with inter-frame interpolation,
// and the press-to-engage input surfaces.

import { CommandEmitter, idleState, UiCommandState } from "./input.js";
import { connect, defaultWsUrl } from "./net.js";
import { encodeCommand, HelloFrame, StateFrame } from "./protocol.js";
import { Ctx, makeLayout, renderScene } from "./render.js";

const STALE_AFTER_MS = 1500;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function lerpFrame(a: StateFrame, b: StateFrame, alpha: number): StateFrame {
  const mix = (x: number, y: number) => x + (y - x) * alpha;
  return {
    ...b,
    t: mix(a.t, b.t),
    drones: b.drones.map((pose, i) =>
      pose.map((v, k) => (k === 3 ? v : mix(a.drones[i]?.[k] ?? v, v))),
    ),
    p_bar: b.p_bar.map((v, k) => mix(a.p_bar[k], v)),
  };
}

function main(): void {
  const canvas = $("view") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d") as unknown as Ctx;
  const statusEl = $("status");

  let hello: HelloFrame | null = null;
  let prevFrame: StateFrame | null = null;
  let lastFrame: StateFrame | null = null;
  let lastFrameWall = 0;
  let connected = false;
  const history: Array<[number, number]> = [];

  const link = connect(
    defaultWsUrl(),
    (frame) => {
      if (frame.type === "hello") {
        hello = frame;
        history.length = 0;
        statusEl.textContent = `${frame.n} drones | mode ${frame.stealth_mode} | dt ${frame.dt}s`;
      } else {
        prevFrame = lastFrame ?? frame;
        lastFrame = frame;
        lastFrameWall = performance.now();
        history.push([frame.t, frame.J]);
        if (history.length > 600) history.shift();
      }
    },
    (up) => {
      connected = up;
    },
  );

  // --- command input ---------------------------------------------------
  const ui: UiCommandState = idleState();
  const pad = $("pad");
  const stick = $("stick");
  const zSlider = $("zslider") as HTMLInputElement;

  const padCenter = (ev: PointerEvent, el: HTMLElement): [number, number] => {
    const r = el.getBoundingClientRect();
    return [ev.clientX - r.left, r.bottom - ev.clientY]; // +y up
  };

  pad.addEventListener("pointerdown", (ev) => {
    pad.setPointerCapture(ev.pointerId);
    ui.engaged = true;
    ui.pressOrigin = padCenter(ev, pad);
    ui.currentOffset = [0, 0];
    pad.classList.add("engaged");
  });
  pad.addEventListener("pointermove", (ev) => {
    if (!ui.engaged) return;
    const p = padCenter(ev, pad);
    ui.currentOffset = [p[0] - ui.pressOrigin[0], p[1] - ui.pressOrigin[1]];
  });
  const disengagePad = () => {
    ui.engaged = false;
    ui.currentOffset = [0, 0];
    pad.classList.remove("engaged");
  };
  pad.addEventListener("pointerup", disengagePad);
  pad.addEventListener("pointercancel", disengagePad);

  let stickActive = false;
  stick.addEventListener("pointerdown", (ev) => {
    stick.setPointerCapture(ev.pointerId);
    stickActive = true;
  });
  stick.addEventListener("pointermove", (ev) => {
    if (!stickActive) return;
    const r = stick.getBoundingClientRect();
    const cx = r.left + r.width / 2;
    const cy = r.top + r.height / 2;
    ui.joystick = [
      Math.max(-1, Math.min(1, (ev.clientX - cx) / (r.width / 2))),
      Math.max(-1, Math.min(1, (cy - ev.clientY) / (r.height / 2))),
    ];
  });
  const releaseStick = () => {
    stickActive = false;
    ui.joystick = [0, 0];
  };
  stick.addEventListener("pointerup", releaseStick);
  stick.addEventListener("pointercancel", releaseStick);

  zSlider.addEventListener("input", () => {
    ui.zAxis = Number(zSlider.value);
  });
  zSlider.addEventListener("change", () => {
    zSlider.value = "0"; // spring back to neutral
    ui.zAxis = 0;
  });

  const emitter = new CommandEmitter((frame) => link.send(encodeCommand(frame)), 20);
  setInterval(() => emitter.poll(ui), 33);

  // --- render loop ------------------------------------------------------
  const draw = () => {
    requestAnimationFrame(draw);
    if (!hello) return;
    const layout = makeLayout(canvas.width, canvas.height, hello);
    const stale = performance.now() - lastFrameWall > STALE_AFTER_MS;
    let frame = lastFrame;
    if (lastFrame && prevFrame && !stale) {
      const frameGap = Math.max((lastFrame.t - prevFrame.t) * 1000, 1);
      const alpha = Math.min((performance.now() - lastFrameWall) / frameGap, 1);
      frame = lerpFrame(prevFrame, lastFrame, alpha);
    }
    renderScene(ctx, layout, hello, frame, history, { connected, stale });
  };
  requestAnimationFrame(draw);
}

window.addEventListener("load", main);
