// Deterministic input scripts: a recorded tape of slider/key actions on the
// 10 ms sample grid. Replaying a script through the real VirtualHand and
// PoseSampler regenerates the exact pose stream a session sent, which is
// what pins the client pipeline to recorded server-side trajectories.

import { DEFAULT_RANGE, VirtualHand } from "./hand.js";
import type { HandSample } from "./sampler.js";
import { PoseSampler } from "./sampler.js";

export type ScriptAction =
  | { at: number; set: { joint: number; value: number } }
  | { at: number; key: string };

export interface InputScript {
  rest: number; // starting value for every joint
  slots: number; // total samples to emit, one per 10 ms grid slot
  calibration_slots: number[]; // slots whose poses go out as calibration samples
  actions: ScriptAction[]; // sorted by `at`, applied before that slot's sample
}

export function runScript(script: InputScript): HandSample[] {
  const hand = new VirtualHand(DEFAULT_RANGE, script.rest);
  const sampler = new PoseSampler(10);
  sampler.start(0);
  const tape: HandSample[] = [];
  let next = 0;
  for (let slot = 0; slot < script.slots; slot++) {
    while (next < script.actions.length && script.actions[next].at === slot) {
      const action = script.actions[next];
      if ("set" in action) hand.setJoint(action.set.joint, action.set.value);
      else hand.handleKey(action.key);
      next += 1;
    }
    const sample = sampler.poll(slot * 10, hand.snapshot());
    if (sample === null) throw new Error(`no sample for slot ${slot}`);
    tape.push(sample);
  }
  if (next !== script.actions.length) {
    throw new Error(`${script.actions.length - next} actions beyond the last slot`);
  }
  return tape;
}
