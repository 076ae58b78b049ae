// Message protocol spoken with the session service over a websocket.
//
// Every frame is a JSON envelope {kind, session, seq, payload}. Client
// sequence numbers are per-connection, strictly increasing from 1, and a
// hello opens (or reopens) the exchange; server sequence numbers are
// per-session and keep growing across reconnects. The hello and
// calibration-done replies carry the active posture map so the client can
// render the cursor with the exact map the server scores against; every
// analytic number shown to the player (RE, SoT, belief, expected state)
// comes from a server message, never from client-side computation.

export type Phase = "calibration" | "familiarization" | "training";

export interface Envelope<K extends string, P> {
  kind: K;
  session: string;
  seq: number;
  payload: P;
}

export interface MapParams {
  weights: number[][]; // 2 x 20 projection rows
  center: number[]; // 20 mean calibration joint angles
  window: number; // workspace is window x window units
  window_center: [number, number];
}

export interface CueSchedule {
  burst_ms: number;
  gap_ms: number;
  bursts: number;
}

// --- client -> server payloads -------------------------------------------

export interface PoseSamplePayload {
  trial: number;
  t: number; // seconds on the client sample clock
  pose: number[];
  dropped?: number; // grid slots coalesced since the previous sample
}

export type ClientMsg =
  | Envelope<"hello", Record<string, never>>
  | Envelope<"calibration-sample", { pose: number[] }>
  | Envelope<"calibration-done", Record<string, never>>
  | Envelope<"pose-sample", PoseSamplePayload>;

// --- server -> client payloads -------------------------------------------

export interface ServerHello {
  phase: Phase;
  trial: number;
  n_trials: number;
  policy: string;
  targets: number[];
  familiarization_seconds: number;
  sample_rate_hz: number;
  map: MapParams | null;
}

export interface CalibrationAck {
  poses: number;
  phase: Phase;
  map: MapParams;
}

export interface TargetAssigned {
  trial: number;
  prev_target: number;
  cur_target: number;
  position: [number, number];
  phase: string;
}

export interface NudgeCue {
  trial: number;
  finger: number; // 1..5, or 0 for "no nudge this trial"
  delay_ms: number;
  schedule: CueSchedule;
}

export interface TrialResult {
  trial: number;
  re: number;
  sot: number | null;
  captured: boolean;
  truncated: boolean;
  end_index: number;
  belief: number[] | null;
  expected_state: number | null;
}

export interface SessionSummary {
  trials: number;
  captures: number;
  truncated_count: number;
  mean_re: number | null;
  mean_sot: number | null;
}

export interface Notice {
  code: string;
  detail: string;
}

export type ServerMsg =
  | Envelope<"hello", ServerHello>
  | Envelope<"calibration-done", CalibrationAck>
  | Envelope<"target-assigned", TargetAssigned>
  | Envelope<"nudge-cue", NudgeCue>
  | Envelope<"trial-result", TrialResult>
  | Envelope<"session-summary", SessionSummary>
  | Envelope<"warning", Notice>
  | Envelope<"error", Notice>;

export type ServerKind = ServerMsg["kind"];

const SERVER_KINDS: ReadonlySet<string> = new Set([
  "hello",
  "calibration-done",
  "target-assigned",
  "nudge-cue",
  "trial-result",
  "session-summary",
  "warning",
  "error",
]);

export class ProtocolError extends Error {}

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function isNumberArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every((x) => typeof x === "number");
}

function checkMap(map: unknown): asserts map is MapParams {
  if (!isRecord(map)) throw new ProtocolError("map must be an object");
  const weights = map["weights"];
  if (!Array.isArray(weights) || weights.length !== 2 || !weights.every(isNumberArray)) {
    throw new ProtocolError("map.weights must be two numeric rows");
  }
  if (!isNumberArray(map["center"])) throw new ProtocolError("map.center must be numeric");
  if (typeof map["window"] !== "number") throw new ProtocolError("map.window must be a number");
  if (!isNumberArray(map["window_center"]) || (map["window_center"] as number[]).length !== 2) {
    throw new ProtocolError("map.window_center must be [x, y]");
  }
}

function checkPayload(kind: ServerKind, payload: Record<string, unknown>): void {
  switch (kind) {
    case "hello": {
      if (typeof payload["n_trials"] !== "number" || typeof payload["phase"] !== "string") {
        throw new ProtocolError("hello payload missing phase/n_trials");
      }
      if (payload["map"] !== null) checkMap(payload["map"]);
      return;
    }
    case "calibration-done":
      checkMap(payload["map"]);
      return;
    case "target-assigned": {
      if (typeof payload["trial"] !== "number" || !isNumberArray(payload["position"])) {
        throw new ProtocolError("target-assigned payload missing trial/position");
      }
      return;
    }
    case "nudge-cue": {
      const sched = payload["schedule"];
      if (typeof payload["finger"] !== "number" || !isRecord(sched)) {
        throw new ProtocolError("nudge-cue payload missing finger/schedule");
      }
      for (const field of ["burst_ms", "gap_ms", "bursts"]) {
        if (typeof sched[field] !== "number") {
          throw new ProtocolError(`nudge-cue schedule missing ${field}`);
        }
      }
      return;
    }
    case "trial-result":
      if (typeof payload["trial"] !== "number" || typeof payload["re"] !== "number") {
        throw new ProtocolError("trial-result payload missing trial/re");
      }
      return;
    case "session-summary":
      if (typeof payload["trials"] !== "number") {
        throw new ProtocolError("session-summary payload missing trials");
      }
      return;
    case "warning":
    case "error":
      if (typeof payload["code"] !== "string" || typeof payload["detail"] !== "string") {
        throw new ProtocolError(`${kind} payload missing code/detail`);
      }
      return;
  }
}

// Parse and validate one inbound frame; throws ProtocolError on anything
// that does not match the catalog above.
export function parseServerMessage(raw: string): ServerMsg {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new ProtocolError("frame is not valid JSON");
  }
  if (!isRecord(data)) throw new ProtocolError("frame must be a JSON object");
  const { kind, session, seq, payload } = data;
  if (typeof kind !== "string" || !SERVER_KINDS.has(kind)) {
    throw new ProtocolError(`unknown server message kind ${JSON.stringify(kind)}`);
  }
  if (typeof session !== "string") throw new ProtocolError("session must be a string");
  if (typeof seq !== "number" || !Number.isInteger(seq)) {
    throw new ProtocolError("seq must be an integer");
  }
  if (!isRecord(payload)) throw new ProtocolError("payload must be an object");
  checkPayload(kind as ServerKind, payload);
  return data as unknown as ServerMsg;
}
