import { describe, expect, it } from "vitest";

import type { Envelope, ServerMsg, TrialResult } from "../src/protocol.js";
import { targetRect, toCanvas } from "../src/render.js";
import { SessionView, TRAIL_LENGTH } from "../src/view.js";

let seq = 0;
function msg<K extends ServerMsg["kind"]>(
  kind: K,
  payload: Extract<ServerMsg, { kind: K }>["payload"],
): ServerMsg {
  seq += 1;
  return { kind, session: "s1", seq, payload } as Envelope<K, typeof payload> as ServerMsg;
}

const MAP = {
  weights: [Array(20).fill(0.1), Array(20).fill(-0.1)],
  center: Array(20).fill(0.5),
  window: 5.0,
  window_center: [2.5, 2.5] as [number, number],
};

describe("SessionView", () => {
  it("walks phases off server messages alone", () => {
    const view = new SessionView();
    expect(view.state.phase).toBe("connecting");
    view.setConnected(true);
    view.apply(
      msg("hello", {
        phase: "calibration",
        trial: 0,
        n_trials: 6,
        policy: "random",
        targets: [1, 2, 3, 4],
        familiarization_seconds: 0.25,
        sample_rate_hz: 100,
        map: null,
      }),
    );
    expect(view.state.phase).toBe("calibration");
    expect(view.state.map).toBeNull();
    view.apply(msg("calibration-done", { poses: 32, phase: "familiarization", map: MAP }));
    expect(view.state.phase).toBe("familiarization");
    expect(view.state.map).toBe(MAP);
    view.apply(
      msg("target-assigned", {
        trial: 1,
        prev_target: 0,
        cur_target: 3,
        position: [2.5, 0.5],
        phase: "training",
      }),
    );
    expect(view.state.phase).toBe("training");
    expect(view.state.trial).toBe(1);
    view.apply(
      msg("session-summary", {
        trials: 6,
        captures: 6,
        truncated_count: 0,
        mean_re: 0.1,
        mean_sot: 0.05,
      }),
    );
    expect(view.state.phase).toBe("finished");
    expect(view.inputFrozen).toBe(true);
  });

  it("shows analytics verbatim from trial-result, never computing them", () => {
    const view = new SessionView();
    const payload: TrialResult = {
      trial: 2,
      re: 0.4375,
      sot: 0.0625,
      captured: true,
      truncated: false,
      end_index: 41,
      belief: [0.25, 0.5, 0.25],
      expected_state: 1.0,
    };
    view.apply(msg("trial-result", payload));
    // the readout object IS the message payload: nothing recomputed client-side
    expect(view.state.lastResult).toBe(payload);
    const noSot: TrialResult = { ...payload, trial: 3, sot: null, expected_state: null };
    view.apply(msg("trial-result", noSot));
    expect(view.state.lastResult?.sot).toBeNull();
    expect(view.state.lastResult?.expected_state).toBeNull();
  });

  it("clears the cue and trail when a new target arrives", () => {
    const view = new SessionView();
    view.apply(
      msg("nudge-cue", {
        trial: 1,
        finger: 2,
        delay_ms: 0,
        schedule: { burst_ms: 150, gap_ms: 2000, bursts: 2 },
      }),
    );
    view.pushCursor([1, 1]);
    expect(view.state.cue?.finger).toBe(2);
    view.apply(
      msg("target-assigned", {
        trial: 2,
        prev_target: 3,
        cur_target: 1,
        position: [0.5, 4.5],
        phase: "training",
      }),
    );
    expect(view.state.cue).toBeNull();
    expect(view.trail).toHaveLength(0);
  });

  it("freezes input and posts a notice when the connection drops", () => {
    const view = new SessionView();
    view.setConnected(true);
    expect(view.inputFrozen).toBe(false);
    view.setConnected(false);
    expect(view.inputFrozen).toBe(true);
    expect(view.state.notices.at(-1)).toMatch(/input frozen/);
  });

  it("records warnings and errors as notices", () => {
    const view = new SessionView();
    view.apply(msg("warning", { code: "sample-rate-drift", detail: "80 Hz" }));
    view.apply(msg("error", { code: "bad-pose", detail: "wrong length" }));
    expect(view.state.notices).toHaveLength(2);
    expect(view.state.notices[0]).toContain("sample-rate-drift");
    expect(view.state.notices[1]).toContain("bad-pose");
  });

  it("caps the cosmetic cursor trail", () => {
    const view = new SessionView();
    for (let i = 0; i < TRAIL_LENGTH + 50; i++) view.pushCursor([i, i]);
    expect(view.trail).toHaveLength(TRAIL_LENGTH);
    expect(view.trail[0][0]).toBe(50);
  });
});

describe("canvas geometry", () => {
  it("flips y so workspace up is canvas up", () => {
    expect(toCanvas([0, 0], 5, 100)).toEqual([0, 500]);
    expect(toCanvas([2.5, 2.5], 5, 100)).toEqual([250, 250]);
    expect(toCanvas([5, 5], 5, 100)).toEqual([500, 0]);
  });

  it("draws a target as the unit grid cell containing it", () => {
    // target 1 sits at (0.5, 4.5): the top-left cell
    expect(targetRect([0.5, 4.5], 5, 100)).toEqual({ x: 0, y: 0, w: 100, h: 100 });
    // target 3 at (2.5, 0.5): bottom middle
    expect(targetRect([2.5, 0.5], 5, 100)).toEqual({ x: 200, y: 400, w: 100, h: 100 });
    // target 4 at (4.5, 4.5): top right
    expect(targetRect([4.5, 4.5], 5, 100)).toEqual({ x: 400, y: 0, w: 100, h: 100 });
  });
});
