import { describe, expect, it } from "vitest";

import { PoseSampler } from "../src/sampler.js";

const POSE = [0.5];

describe("PoseSampler", () => {
  it("emits one sample per 10 ms grid slot, timestamped on the grid", () => {
    const s = new PoseSampler();
    s.start(1000);
    const a = s.poll(1000, POSE);
    expect(a).not.toBeNull();
    expect(a!.slot).toBe(0);
    expect(a!.t).toBe(0);
    expect(s.poll(1004, POSE)).toBeNull(); // same slot: nothing new
    const b = s.poll(1010.2, POSE)!;
    expect(b.slot).toBe(1);
    expect(b.t).toBe(0.01);
    expect(b.dropped).toBe(0);
  });

  it("keeps cadence exact under frame jitter within the period", () => {
    const s = new PoseSampler();
    s.start(0);
    const times: number[] = [];
    // jittery caller: polls every 7-9 ms, never falling a full slot behind
    let now = 0;
    for (let i = 0; i < 200; i++) {
      now += 7 + ((i * 13) % 3);
      const sample = s.poll(now, POSE);
      if (sample !== null) times.push(sample.t);
    }
    expect(s.dropCount).toBe(0);
    for (let i = 1; i < times.length; i++) {
      const interval = times[i] - times[i - 1];
      // nominal 10 ms, well within a 20% band
      expect(Math.abs(interval - 0.01)).toBeLessThan(0.002);
    }
  });

  it("coalesces missed slots and counts them", () => {
    const s = new PoseSampler();
    s.start(0);
    expect(s.poll(0, POSE)!.dropped).toBe(0);
    const late = s.poll(45, POSE)!; // slots 1..3 never polled
    expect(late.slot).toBe(4);
    expect(late.dropped).toBe(3);
    expect(s.dropCount).toBe(3);
    expect(s.poll(50, POSE)!.dropped).toBe(0);
    expect(s.dropCount).toBe(3);
  });

  it("stays quiet until started", () => {
    const s = new PoseSampler();
    expect(s.started).toBe(false);
    expect(s.poll(123, POSE)).toBeNull();
  });
});
