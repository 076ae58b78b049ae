// Render loop with injectable timing so tests can step frames by hand.

export interface LoopClient {
  frame(nowMs: number): void;
}

export interface FrameScheduler {
  request(cb: (nowMs: number) => void): number;
  cancel(handle: number): void;
}

export function animationFrames(): FrameScheduler {
  return {
    request: (cb) => requestAnimationFrame(cb),
    cancel: (h) => cancelAnimationFrame(h),
  };
}

export class GameLoop {
  private handle: number | null = null;

  constructor(
    private readonly client: LoopClient,
    private readonly scheduler: FrameScheduler,
  ) {}

  start(): void {
    if (this.handle !== null) return;
    const tick = (nowMs: number): void => {
      this.client.frame(nowMs);
      this.handle = this.scheduler.request(tick);
    };
    this.handle = this.scheduler.request(tick);
  }

  stop(): void {
    if (this.handle !== null) {
      this.scheduler.cancel(this.handle);
      this.handle = null;
    }
  }
}
