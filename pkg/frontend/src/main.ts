// Browser entry point: builds the controls, connects to the session service,
// streams poses, and renders. Configuration comes from query parameters:
//   ?server=ws://host:port/session   (default ws://127.0.0.1:8766/session)
//   &session=<session id>            (default a fresh timestamped id)

import { cursorPosition } from "./bomi.js";
import { CueScheduler } from "./cue.js";
import { JOINT_KEYS, JOINTS_PER_FINGER, N_FINGERS, VirtualHand } from "./hand.js";
import { animationFrames, GameLoop } from "./loop.js";
import { DEFAULT_OPTIONS, Renderer } from "./render.js";
import { PoseSampler } from "./sampler.js";
import { SessionView } from "./view.js";
import { SessionClient, webSocketTransport } from "./ws.js";

const CALIBRATION_EVERY = 10; // send every 10th sample (10 Hz) while calibrating
const RECONNECT_DELAY_MS = 1000;
const POLL_INTERVAL_MS = 4; // finer than the 10 ms grid so no slot is late

const FINGER_NAMES = ["thumb", "index", "middle", "ring", "little"];

function buildSliders(
  root: HTMLElement,
  hand: VirtualHand,
  onInput: () => void,
): HTMLInputElement[] {
  const sliders: HTMLInputElement[] = [];
  for (let f = 0; f < N_FINGERS; f++) {
    const box = document.createElement("fieldset");
    const legend = document.createElement("legend");
    legend.textContent = `${f + 1} ${FINGER_NAMES[f]}`;
    box.appendChild(legend);
    for (let j = 0; j < JOINTS_PER_FINGER; j++) {
      const index = hand.jointIndex(f, j);
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = "1.6";
      slider.step = "0.001";
      slider.value = String(hand.joint(index));
      slider.title = `finger ${f + 1} joint ${j + 1} (keys ${JOINT_KEYS[j][0]}/${JOINT_KEYS[j][1]})`;
      slider.addEventListener("input", () => {
        hand.setJoint(index, Number(slider.value));
        onInput();
      });
      box.appendChild(slider);
      sliders.push(slider);
    }
    root.appendChild(box);
  }
  return sliders;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? "ws://127.0.0.1:8766/session";
  const session = params.get("session") ?? `ui-${Date.now().toString(36)}`;

  const app = document.getElementById("app");
  if (app === null) throw new Error("missing #app container");

  const canvas = document.createElement("canvas");
  canvas.width = 5 * DEFAULT_OPTIONS.px;
  canvas.height = 5 * DEFAULT_OPTIONS.px + DEFAULT_OPTIONS.fingerPanelHeight;
  app.appendChild(canvas);
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("canvas 2d context unavailable");

  const panel = document.createElement("div");
  panel.id = "controls";
  app.appendChild(panel);

  const hand = new VirtualHand();
  const view = new SessionView();
  const cue = new CueScheduler();
  const sampler = new PoseSampler();
  const renderer = new Renderer(ctx);

  const sliders = buildSliders(panel, hand, () => undefined);
  const syncSliders = (): void => {
    sliders.forEach((slider, index) => {
      slider.value = String(hand.joint(index));
    });
  };

  const doneButton = document.createElement("button");
  doneButton.textContent = "finish calibration";
  panel.appendChild(doneButton);

  const client = new SessionClient(webSocketTransport(server), session, {
    onMessage: (msg) => {
      view.apply(msg);
      if (msg.kind === "nudge-cue") cue.schedule(msg.payload, performance.now());
      if (msg.kind === "session-summary") cue.clear();
    },
    onStatus: (connected) => {
      view.setConnected(connected);
      if (!connected) window.setTimeout(() => client.connect(), RECONNECT_DELAY_MS);
    },
    onBadFrame: (detail) => view.pushNotice(`bad frame from server: ${detail}`),
  });

  doneButton.addEventListener("click", () => {
    if (view.state.phase === "calibration") client.send("calibration-done", {});
  });

  document.addEventListener("keydown", (ev) => {
    if (ev.target instanceof HTMLInputElement) return;
    if (hand.handleKey(ev.key)) {
      syncSliders();
      ev.preventDefault();
    }
  });

  sampler.start(performance.now());
  let sent = 0;
  window.setInterval(() => {
    if (view.inputFrozen) return;
    const sample = sampler.poll(performance.now(), hand.snapshot());
    if (sample === null) return;
    if (view.state.phase === "calibration") {
      if (sample.slot % CALIBRATION_EVERY === 0) {
        if (client.send("calibration-sample", { pose: sample.pose })) {
          view.state.calibrationPoses += 1;
        }
      }
      return;
    }
    const payload = {
      trial: view.state.trial,
      t: sample.t,
      pose: sample.pose,
      ...(sample.dropped > 0 ? { dropped: sample.dropped } : {}),
    };
    if (client.sendPose(payload)) {
      sent += 1;
      if (view.state.map !== null) {
        view.pushCursor(cursorPosition(view.state.map, sample.pose));
      }
    }
  }, POLL_INTERVAL_MS);

  const loop = new GameLoop({ frame: (nowMs) => renderer.draw(view, cue, nowMs) }, animationFrames());
  loop.start();
  client.connect();
  void sent;
}

main();
