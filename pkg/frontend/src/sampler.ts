// Fixed-rate pose sampling on a 10 ms grid (100 Hz nominal).
//
// poll() emits at most one sample per call, timestamped exactly on the grid
// slot it lands in, so emitted cadence never drifts from nominal. When the
// caller falls behind (slow frames, tab in background) the missed slots are
// coalesced into the newest one and counted; the count rides along in the
// sample so the server can see the gap.

export interface HandSample {
  slot: number; // grid slot index since start()
  t: number; // slot time in seconds
  pose: number[];
  dropped: number; // slots coalesced since the previous emitted sample
}

export class PoseSampler {
  private t0: number | null = null;
  private last = -1;
  private droppedTotal = 0;

  constructor(readonly periodMs: number = 10) {
    if (!(periodMs > 0)) throw new Error(`sample period must be positive, got ${periodMs}`);
  }

  start(nowMs: number): void {
    this.t0 = nowMs;
    this.last = -1;
    this.droppedTotal = 0;
  }

  get started(): boolean {
    return this.t0 !== null;
  }

  get dropCount(): number {
    return this.droppedTotal;
  }

  poll(nowMs: number, pose: number[]): HandSample | null {
    if (this.t0 === null) return null;
    const slot = Math.floor((nowMs - this.t0) / this.periodMs);
    if (slot <= this.last) return null;
    const dropped = this.last < 0 ? 0 : slot - this.last - 1;
    this.last = slot;
    this.droppedTotal += dropped;
    return { slot, t: (slot * this.periodMs) / 1000, pose, dropped };
  }
}
