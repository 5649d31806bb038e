import { describe, expect, it } from "vitest";

import { CommandEmitter, idleState, mapInput } from "../src/input.js";
import { CommandFrame } from "../src/protocol.js";

describe("mapInput", () => {
  it("emits an all-zero disengaged frame when not engaged", () => {
    const frame = mapInput(idleState());
    expect(frame.engaged).toBe(false);
    expect(frame.v).toEqual([0, 0, 0]);
    expect(frame.w).toEqual([0, 0]);
  });

  it("maps a full-right joystick to pure yaw rate 0.15", () => {
    const ui = { ...idleState(), engaged: true, joystick: [1, 0] as [number, number] };
    const frame = mapInput(ui);
    expect(frame.w[0]).toBeCloseTo(0.0, 12); // pitch rate
    expect(frame.w[1]).toBeCloseTo(0.15, 12); // yaw rate
  });

  it("maps a full-up joystick to pure pitch rate 0.15", () => {
    const ui = { ...idleState(), engaged: true, joystick: [0, 1] as [number, number] };
    const frame = mapInput(ui);
    expect(frame.w[0]).toBeCloseTo(0.15, 12);
    expect(frame.w[1]).toBeCloseTo(0.0, 12);
  });

  it("maps half of the drag radius along +x to v = [0.25, 0, 0]", () => {
    const ui = idleState(80);
    ui.engaged = true;
    ui.currentOffset = [40, 0];
    const frame = mapInput(ui);
    expect(frame.v[0]).toBeCloseTo(0.25, 12);
    expect(frame.v[1]).toBeCloseTo(0.0, 12);
    expect(frame.v[2]).toBeCloseTo(0.0, 12);
  });

  it("clamps displacement beyond the drag radius to the speed limit", () => {
    const ui = idleState(80);
    ui.engaged = true;
    ui.currentOffset = [500, -500];
    const frame = mapInput(ui);
    expect(frame.v[0]).toBeCloseTo(0.5, 12);
    expect(frame.v[1]).toBeCloseTo(-0.5, 12);
  });

  it("feeds the vertical slider into v_z", () => {
    const ui = { ...idleState(), engaged: true, zAxis: -0.5 };
    expect(mapInput(ui).v[2]).toBeCloseTo(-0.25, 12);
  });

  it("clamps joystick values outside the unit box", () => {
    const ui = { ...idleState(), engaged: true, joystick: [5, -5] as [number, number] };
    const frame = mapInput(ui);
    expect(frame.w[1]).toBeCloseTo(0.15, 12);
    expect(frame.w[0]).toBeCloseTo(-0.15, 12);
  });
});

describe("CommandEmitter", () => {
  function harness(maxHz = 20) {
    const sent: CommandFrame[] = [];
    const clock = { t: 0 };
    const emitter = new CommandEmitter((f) => sent.push(f), maxHz, () => clock.t);
    return { sent, clock, emitter };
  }

  it("bounds the emission rate", () => {
    const { sent, clock, emitter } = harness(20);
    const ui = { ...idleState(), engaged: true };
    for (let ms = 0; ms <= 1000; ms += 5) {
      clock.t = ms;
      emitter.poll(ui);
    }
    expect(sent.length).toBeLessThanOrEqual(30); // never above 30 Hz
    expect(sent.length).toBeGreaterThanOrEqual(19);
  });

  it("sends a single zero frame on disengage, then goes silent", () => {
    const { sent, clock, emitter } = harness();
    const ui = { ...idleState(), engaged: true };
    clock.t = 0;
    emitter.poll(ui);
    clock.t = 100;
    emitter.poll(ui);
    ui.engaged = false;
    clock.t = 150;
    emitter.poll(ui);
    clock.t = 200;
    emitter.poll(ui);
    clock.t = 1000;
    emitter.poll(ui);
    const zeros = sent.filter((f) => !f.engaged);
    expect(zeros.length).toBe(1);
    expect(sent[sent.length - 1].engaged).toBe(false);
    expect(zeros[0].v).toEqual([0, 0, 0]);
  });

  it("resumes emission after re-engage", () => {
    const { sent, clock, emitter } = harness();
    const ui = { ...idleState(), engaged: true };
    emitter.poll(ui);
    ui.engaged = false;
    clock.t = 100;
    emitter.poll(ui);
    ui.engaged = true;
    clock.t = 300;
    emitter.poll(ui);
    expect(sent.filter((f) => f.engaged).length).toBe(2);
  });

  it("caps the configured rate at 30 Hz", () => {
    const { emitter } = harness(120);
    expect(emitter.minIntervalMs).toBeGreaterThanOrEqual(1000 / 30 - 1e-9);
  });
});
