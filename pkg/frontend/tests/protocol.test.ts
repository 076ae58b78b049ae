import { describe, expect, it } from "vitest";

import { parseServerMessage, ProtocolError } from "../src/protocol.js";

function frame(kind: string, payload: unknown, seq = 1): string {
  return JSON.stringify({ kind, session: "s1", seq, payload });
}

const MAP = {
  weights: [Array(20).fill(0.1), Array(20).fill(-0.1)],
  center: Array(20).fill(0.5),
  window: 5.0,
  window_center: [2.5, 2.5],
};

describe("parseServerMessage", () => {
  it("accepts every catalogued server kind", () => {
    const frames = [
      frame("hello", {
        phase: "training",
        trial: 3,
        n_trials: 480,
        policy: "qmdp",
        targets: [1, 2, 3, 4],
        familiarization_seconds: 6.0,
        sample_rate_hz: 100.0,
        map: MAP,
      }),
      frame("calibration-done", { poses: 32, phase: "familiarization", map: MAP }),
      frame("target-assigned", {
        trial: 1,
        prev_target: 0,
        cur_target: 2,
        position: [2.5, 2.5],
        phase: "training",
      }),
      frame("nudge-cue", {
        trial: 1,
        finger: 4,
        delay_ms: 0.0,
        schedule: { burst_ms: 150.0, gap_ms: 2000.0, bursts: 2 },
      }),
      frame("trial-result", {
        trial: 1,
        re: 0.25,
        sot: null,
        captured: true,
        truncated: false,
        end_index: 41,
        belief: [0.2, 0.5, 0.3],
        expected_state: 1.1,
      }),
      frame("session-summary", {
        trials: 480,
        captures: 401,
        truncated_count: 2,
        mean_re: 0.4,
        mean_sot: 0.1,
      }),
      frame("warning", { code: "sample-rate-drift", detail: "observed 80 Hz" }),
      frame("error", { code: "seq-regression", detail: "seq 4 does not follow 9" }),
    ];
    for (const raw of frames) {
      const msg = parseServerMessage(raw);
      expect(msg.session).toBe("s1");
      expect(msg.seq).toBe(1);
    }
  });

  it("accepts a hello without a fitted map", () => {
    const msg = parseServerMessage(
      frame("hello", {
        phase: "calibration",
        trial: 0,
        n_trials: 6,
        policy: "random",
        targets: [1, 2, 3, 4],
        familiarization_seconds: 6.0,
        sample_rate_hz: 100.0,
        map: null,
      }),
    );
    if (msg.kind !== "hello") throw new Error("wrong kind");
    expect(msg.payload.map).toBeNull();
  });

  it("rejects malformed frames", () => {
    const bad = [
      "not json",
      JSON.stringify([1, 2, 3]),
      frame("telemetry", {}),
      JSON.stringify({ kind: "hello", session: "s1", seq: 1.5, payload: {} }),
      JSON.stringify({ kind: "hello", session: 7, seq: 1, payload: {} }),
      JSON.stringify({ kind: "hello", session: "s1", seq: 1, payload: "x" }),
      frame("nudge-cue", { trial: 1, finger: 2, delay_ms: 0, schedule: { burst_ms: 150 } }),
      frame("calibration-done", { poses: 32, phase: "familiarization", map: { weights: [[1]] } }),
      frame("trial-result", { trial: 1 }),
    ];
    for (const raw of bad) {
      expect(() => parseServerMessage(raw), raw).toThrow(ProtocolError);
    }
  });
});
