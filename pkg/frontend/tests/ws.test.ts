import { describe, expect, it } from "vitest";

import type { ServerMsg } from "../src/protocol.js";
import type { Transport, TransportEvents } from "../src/ws.js";
import { SessionClient } from "../src/ws.js";

class FakeTransport implements Transport {
  sent: Array<{ kind: string; session: string; seq: number; payload: unknown }> = [];
  closed = false;

  constructor(readonly events: TransportEvents) {}

  send(data: string): void {
    this.sent.push(JSON.parse(data));
  }

  close(): void {
    this.closed = true;
    this.events.onClose();
  }
}

function harness(): {
  client: SessionClient;
  transports: FakeTransport[];
  messages: ServerMsg[];
  statuses: boolean[];
  badFrames: string[];
} {
  const transports: FakeTransport[] = [];
  const messages: ServerMsg[] = [];
  const statuses: boolean[] = [];
  const badFrames: string[] = [];
  const client = new SessionClient(
    (events) => {
      const t = new FakeTransport(events);
      transports.push(t);
      return t;
    },
    "s7",
    {
      onMessage: (m) => messages.push(m),
      onStatus: (c) => statuses.push(c),
      onBadFrame: (d) => badFrames.push(d),
    },
  );
  return { client, transports, messages, statuses, badFrames };
}

describe("SessionClient", () => {
  it("opens with a hello and numbers messages strictly increasing from 1", () => {
    const h = harness();
    h.client.connect();
    const t = h.transports[0];
    t.events.onOpen();
    h.client.sendPose({ trial: 1, t: 0.01, pose: [0.5] });
    h.client.sendPose({ trial: 1, t: 0.02, pose: [0.5], dropped: 2 });
    expect(t.sent.map((m) => m.kind)).toEqual(["hello", "pose-sample", "pose-sample"]);
    expect(t.sent.map((m) => m.seq)).toEqual([1, 2, 3]);
    expect(t.sent.every((m) => m.session === "s7")).toBe(true);
  });

  it("freezes sends while disconnected and restarts numbering on reconnect", () => {
    const h = harness();
    h.client.connect();
    h.transports[0].events.onOpen();
    h.client.sendPose({ trial: 1, t: 0.01, pose: [0.5] });
    h.transports[0].close();
    expect(h.statuses).toEqual([true, false]);
    expect(h.client.connected).toBe(false);
    expect(h.client.sendPose({ trial: 1, t: 0.02, pose: [0.5] })).toBe(false);

    h.client.connect();
    expect(h.transports).toHaveLength(2);
    h.transports[1].events.onOpen();
    expect(h.transports[1].sent.map((m) => m.kind)).toEqual(["hello"]);
    expect(h.transports[1].sent[0].seq).toBe(1); // fresh connection, fresh numbering
  });

  it("parses inbound frames and reports malformed ones without dying", () => {
    const h = harness();
    h.client.connect();
    const t = h.transports[0];
    t.events.onOpen();
    t.events.onMessage(
      JSON.stringify({
        kind: "warning",
        session: "s7",
        seq: 5,
        payload: { code: "sample-rate-drift", detail: "slow" },
      }),
    );
    t.events.onMessage("garbage");
    expect(h.messages).toHaveLength(1);
    expect(h.messages[0].kind).toBe("warning");
    expect(h.badFrames).toHaveLength(1);
  });
});
