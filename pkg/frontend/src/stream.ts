// WebSocket wrapper: JSON parsing, typed dispatch, connection state, and
// automatic reconnect with backoff. The socket object is injected so tests
// can drive the client without a network.

import type { StreamMsg } from './types.js';

export type ConnState = 'connecting' | 'connected' | 'disconnected';

export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

type SocketFactory = (url: string) => SocketLike;

export class StreamClient {
  state: ConnState = 'disconnected';
  displayDrops = 0;
  received = 0;
  private socket: SocketLike | null = null;
  private handlers = new Map<string, ((msg: never) => void)[]>();
  private stateHandlers: ((s: ConnState) => void)[] = [];
  private reconnectDelayMs = 500;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(
    private url: string,
    private factory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
  ) {}

  on<T extends StreamMsg['type']>(type: T, fn: (msg: Extract<StreamMsg, { type: T }>) => void) {
    const list = this.handlers.get(type) ?? [];
    list.push(fn as (msg: never) => void);
    this.handlers.set(type, list);
    return this;
  }

  onState(fn: (s: ConnState) => void) {
    this.stateHandlers.push(fn);
    return this;
  }

  private setState(s: ConnState) {
    this.state = s;
    for (const fn of this.stateHandlers) fn(s);
  }

  connect() {
    this.closed = false;
    this.setState('connecting');
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.reconnectDelayMs = 500;
      this.setState('connected');
    };
    sock.onmessage = (ev) => this.handleData(ev.data);
    sock.onerror = () => undefined;
    sock.onclose = () => {
      this.setState('disconnected');
      if (!this.closed) {
        this.timer = setTimeout(() => this.connect(), this.reconnectDelayMs);
        this.reconnectDelayMs = Math.min(this.reconnectDelayMs * 2, 10_000);
      }
    };
    return this;
  }

  handleData(data: string) {
    let msg: StreamMsg;
    try {
      msg = JSON.parse(data);
    } catch {
      return; // tolerate garbage on the wire
    }
    this.received += 1;
    if ('display_drops' in msg && typeof msg.display_drops === 'number') {
      this.displayDrops = msg.display_drops;
    }
    for (const fn of this.handlers.get(msg.type) ?? []) {
      (fn as (m: StreamMsg) => void)(msg);
    }
  }

  close() {
    this.closed = true;
    if (this.timer) clearTimeout(this.timer);
    this.socket?.close();
    this.setState('disconnected');
  }
}
