// Session transport: JSON envelopes over a websocket (or any injected
// transport in tests). Owns the client sequence numbers: per connection,
// strictly increasing from 1, with a hello as the first frame after every
// (re)connect. While disconnected nothing is sent; the caller freezes input
// and shows the reconnect banner off the status callback.

import type { ClientMsg, PoseSamplePayload, ServerMsg } from "./protocol.js";
import { parseServerMessage, ProtocolError } from "./protocol.js";

export interface Transport {
  send(data: string): void;
  close(): void;
}

export interface TransportEvents {
  onOpen(): void;
  onMessage(data: string): void;
  onClose(): void;
}

export type TransportFactory = (events: TransportEvents) => Transport;

export function webSocketTransport(url: string): TransportFactory {
  return (events) => {
    const ws = new WebSocket(url);
    ws.onopen = () => events.onOpen();
    ws.onmessage = (ev) => events.onMessage(String(ev.data));
    ws.onclose = () => events.onClose();
    return {
      send: (data) => ws.send(data),
      close: () => ws.close(),
    };
  };
}

export interface SessionClientHandlers {
  onMessage(msg: ServerMsg): void;
  onStatus(connected: boolean): void;
  onBadFrame?(detail: string): void;
}

export class SessionClient {
  private transport: Transport | null = null;
  private open = false;
  private seq = 0;

  constructor(
    private readonly factory: TransportFactory,
    readonly session: string,
    private readonly handlers: SessionClientHandlers,
  ) {}

  get connected(): boolean {
    return this.open;
  }

  get lastSeq(): number {
    return this.seq;
  }

  connect(): void {
    if (this.transport !== null) return;
    this.transport = this.factory({
      onOpen: () => {
        this.open = true;
        this.seq = 0;
        this.handlers.onStatus(true);
        this.send("hello", {});
      },
      onMessage: (data) => {
        let msg: ServerMsg;
        try {
          msg = parseServerMessage(data);
        } catch (err) {
          if (err instanceof ProtocolError && this.handlers.onBadFrame) {
            this.handlers.onBadFrame(err.message);
            return;
          }
          throw err;
        }
        this.handlers.onMessage(msg);
      },
      onClose: () => {
        this.open = false;
        this.transport = null;
        this.handlers.onStatus(false);
      },
    });
  }

  disconnect(): void {
    this.transport?.close();
  }

  send<K extends ClientMsg["kind"]>(
    kind: K,
    payload: Extract<ClientMsg, { kind: K }>["payload"],
  ): boolean {
    if (!this.open || this.transport === null) return false;
    this.seq += 1;
    const envelope = { kind, session: this.session, seq: this.seq, payload };
    this.transport.send(JSON.stringify(envelope));
    return true;
  }

  sendPose(payload: PoseSamplePayload): boolean {
    return this.send("pose-sample", payload);
  }
}
