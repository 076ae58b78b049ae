// Canvas rendering: the square game window (grid, active target square,
// cursor trail), a finger diagram with the active nudge highlight, live
// readouts, and the reconnect banner. Geometry helpers are pure so tests can
// pin the coordinate conventions without a canvas.

import type { CueScheduler } from "./cue.js";
import { N_FINGERS } from "./hand.js";
import type { SessionView } from "./view.js";

// Workspace (x, y) to canvas pixels; canvas y grows downward, workspace y up.
export function toCanvas(
  xy: readonly [number, number],
  window: number,
  px: number,
): [number, number] {
  return [xy[0] * px, (window - xy[1]) * px];
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

// The unit grid cell a target occupies, as a canvas rectangle.
export function targetRect(position: readonly [number, number], window: number, px: number): Rect {
  const [left, top] = toCanvas([position[0] - 0.5, position[1] + 0.5], window, px);
  return { x: left, y: top, w: px, h: px };
}

export interface RendererOptions {
  px: number; // canvas pixels per workspace unit
  fingerPanelHeight: number;
}

export const DEFAULT_OPTIONS: RendererOptions = { px: 120, fingerPanelHeight: 90 };

const FINGER_NAMES = ["thumb", "index", "middle", "ring", "little"];

export class Renderer {
  constructor(
    private readonly ctx: CanvasRenderingContext2D,
    private readonly opts: RendererOptions = DEFAULT_OPTIONS,
  ) {}

  draw(view: SessionView, cue: CueScheduler, nowMs: number): void {
    const st = view.state;
    const window = st.map?.window ?? 5.0;
    const side = window * this.opts.px;
    const ctx = this.ctx;

    ctx.clearRect(0, 0, side, side + this.opts.fingerPanelHeight);
    ctx.fillStyle = "#fafafa";
    ctx.fillRect(0, 0, side, side);

    ctx.strokeStyle = "#d0d0d0";
    ctx.lineWidth = 1;
    for (let u = 0; u <= window; u++) {
      const p = u * this.opts.px;
      ctx.beginPath();
      ctx.moveTo(p, 0);
      ctx.lineTo(p, side);
      ctx.moveTo(0, p);
      ctx.lineTo(side, p);
      ctx.stroke();
    }

    if (st.target !== null) {
      const rect = targetRect(st.target.position, window, this.opts.px);
      ctx.fillStyle = "#ffd54d";
      ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
      ctx.strokeStyle = "#b8860b";
      ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
    }

    if (view.trail.length > 0) {
      ctx.strokeStyle = "#5588cc";
      ctx.lineWidth = 2;
      ctx.beginPath();
      view.trail.forEach((xy, i) => {
        const [cx, cy] = toCanvas(xy, window, this.opts.px);
        if (i === 0) ctx.moveTo(cx, cy);
        else ctx.lineTo(cx, cy);
      });
      ctx.stroke();
      const [hx, hy] = toCanvas(view.trail[view.trail.length - 1], window, this.opts.px);
      ctx.fillStyle = "#1f4f9f";
      ctx.beginPath();
      ctx.arc(hx, hy, 6, 0, 2 * Math.PI);
      ctx.fill();
    }

    this.drawFingerPanel(cue.activeFinger(nowMs), side);
    this.drawReadouts(view, side);

    if (!st.connected) {
      ctx.fillStyle = "rgba(40, 40, 40, 0.75)";
      ctx.fillRect(0, side / 2 - 30, side, 60);
      ctx.fillStyle = "#fff";
      ctx.font = "20px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText("connection lost, reconnecting; input frozen", side / 2, side / 2 + 7);
      ctx.textAlign = "left";
    }
  }

  private drawFingerPanel(activeFinger: number | null, top: number): void {
    const ctx = this.ctx;
    const width = 5 * this.opts.px;
    const slot = width / N_FINGERS;
    ctx.fillStyle = "#f0f0f0";
    ctx.fillRect(0, top, width, this.opts.fingerPanelHeight);
    ctx.font = "12px sans-serif";
    for (let f = 0; f < N_FINGERS; f++) {
      const x = f * slot + slot / 2;
      // fingers are numbered 1..5 in cue messages; 0 means no nudge
      const lit = activeFinger === f + 1;
      ctx.fillStyle = lit ? "#e5484d" : "#c8c8c8";
      ctx.fillRect(x - 12, top + 12, 24, 50);
      ctx.fillStyle = "#333";
      ctx.fillText(`${f + 1} ${FINGER_NAMES[f]}`, x - 20, top + 78);
    }
  }

  private drawReadouts(view: SessionView, side: number): void {
    const ctx = this.ctx;
    const st = view.state;
    ctx.fillStyle = "#222";
    ctx.font = "14px sans-serif";
    const lines: string[] = [];
    lines.push(`phase ${st.phase}   trial ${st.trial}/${st.nTrials}   policy ${st.policy}`);
    if (st.phase === "calibration") {
      lines.push(`calibration poses sent: ${st.calibrationPoses}`);
    }
    const r = st.lastResult;
    if (r !== null) {
      const sot = r.sot === null ? "n/a" : r.sot.toFixed(3);
      const exp = r.expected_state === null ? "n/a" : r.expected_state.toFixed(2);
      lines.push(
        `trial ${r.trial}: RE ${r.re.toFixed(3)}  SoT ${sot}  expected state ${exp}` +
          `  ${r.captured ? "captured" : "missed"}${r.truncated ? " (timed out)" : ""}`,
      );
    }
    const s = st.summary;
    if (s !== null) {
      const meanRe = s.mean_re === null ? "n/a" : s.mean_re.toFixed(3);
      const meanSot = s.mean_sot === null ? "n/a" : s.mean_sot.toFixed(3);
      lines.push(
        `done: ${s.captures}/${s.trials} captured, mean RE ${meanRe}, mean SoT ${meanSot}`,
      );
    }
    const notice = st.notices[st.notices.length - 1];
    if (notice !== undefined) lines.push(notice);
    lines.forEach((line, i) => ctx.fillText(line, 8, 18 + 18 * i));
    void side;
  }
}
