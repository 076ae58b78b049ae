// Turns a nudge-cue message into concrete highlight windows on the local
// clock: `bursts` highlights of burst_ms each, with gap_ms between the end
// of one burst and the start of the next, the first one delay_ms after
// receipt. The finger diagram asks activeFinger() every frame; rendering is
// a pure function of the clock, so highlight edges land within one frame of
// the prescribed schedule.

import type { NudgeCue } from "./protocol.js";

export interface BurstWindow {
  start: number;
  end: number;
}

export class CueScheduler {
  private finger = 0;
  private windows: BurstWindow[] = [];

  schedule(cue: NudgeCue, receivedAtMs: number): void {
    this.finger = cue.finger;
    this.windows = [];
    if (cue.finger === 0) return; // finger 0 means "no nudge this trial"
    let start = receivedAtMs + cue.delay_ms;
    for (let k = 0; k < cue.schedule.bursts; k++) {
      this.windows.push({ start, end: start + cue.schedule.burst_ms });
      start += cue.schedule.burst_ms + cue.schedule.gap_ms;
    }
  }

  clear(): void {
    this.finger = 0;
    this.windows = [];
  }

  get plan(): readonly BurstWindow[] {
    return this.windows;
  }

  activeFinger(nowMs: number): number | null {
    for (const w of this.windows) {
      if (nowMs >= w.start && nowMs < w.end) return this.finger;
    }
    return null;
  }

  done(nowMs: number): boolean {
    return this.windows.length === 0 || nowMs >= this.windows[this.windows.length - 1].end;
  }
}
