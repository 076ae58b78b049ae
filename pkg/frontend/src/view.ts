// Message-ordered session state for the renderer. The reducer copies values
// out of server messages verbatim: every number on screen that judges the
// player (RE, SoT, belief, expected state, captures) originates in a server
// message. The only client-derived display data is the cosmetic cursor
// trail, mapped through the server-delivered posture map.

import type {
  MapParams,
  NudgeCue,
  ServerMsg,
  SessionSummary,
  TargetAssigned,
  TrialResult,
} from "./protocol.js";

export type UiPhase = "connecting" | "calibration" | "familiarization" | "training" | "finished";

export const TRAIL_LENGTH = 200;
export const NOTICE_LIMIT = 50;

export interface ViewState {
  connected: boolean;
  phase: UiPhase;
  trial: number;
  nTrials: number;
  policy: string;
  map: MapParams | null;
  target: TargetAssigned | null;
  cue: NudgeCue | null;
  lastResult: TrialResult | null;
  summary: SessionSummary | null;
  notices: string[];
  serverSeq: number;
  calibrationPoses: number; // client-side count of samples sent so far
}

export class SessionView {
  readonly state: ViewState = {
    connected: false,
    phase: "connecting",
    trial: 0,
    nTrials: 0,
    policy: "",
    map: null,
    target: null,
    cue: null,
    lastResult: null,
    summary: null,
    notices: [],
    serverSeq: 0,
    calibrationPoses: 0,
  };

  trail: Array<[number, number]> = [];

  get inputFrozen(): boolean {
    return !this.state.connected || this.state.phase === "finished";
  }

  setConnected(connected: boolean): void {
    this.state.connected = connected;
    if (!connected) this.pushNotice("connection lost, reconnecting; input frozen");
  }

  pushNotice(text: string): void {
    this.state.notices.push(text);
    if (this.state.notices.length > NOTICE_LIMIT) this.state.notices.shift();
  }

  pushCursor(xy: [number, number]): void {
    this.trail.push(xy);
    if (this.trail.length > TRAIL_LENGTH) this.trail.shift();
  }

  apply(msg: ServerMsg): void {
    this.state.serverSeq = msg.seq;
    switch (msg.kind) {
      case "hello": {
        const p = msg.payload;
        this.state.phase = p.phase;
        this.state.trial = p.trial;
        this.state.nTrials = p.n_trials;
        this.state.policy = p.policy;
        if (p.map !== null) this.state.map = p.map;
        break;
      }
      case "calibration-done":
        this.state.phase = msg.payload.phase;
        this.state.map = msg.payload.map;
        break;
      case "target-assigned":
        this.state.phase = "training";
        this.state.trial = msg.payload.trial;
        this.state.target = msg.payload;
        this.state.cue = null; // the trial's cue follows in its own message
        this.trail = [];
        break;
      case "nudge-cue":
        this.state.cue = msg.payload;
        break;
      case "trial-result":
        this.state.lastResult = msg.payload;
        break;
      case "session-summary":
        this.state.summary = msg.payload;
        this.state.phase = "finished";
        break;
      case "warning":
        this.pushNotice(`warning ${msg.payload.code}: ${msg.payload.detail}`);
        break;
      case "error":
        this.pushNotice(`error ${msg.payload.code}: ${msg.payload.detail}`);
        break;
    }
  }
}
