// Persistent control-channel connection: one WebSocket, automatic
// reconnect with exponential backoff, and request/reply correlation.
//
// The socket constructor is injectable so tests can script the engine side.

import {
  CommandReply,
  MonitorMessage,
  StatusMessage,
  isMonitor,
  isReply,
  isStatus,
  parseServerMessage,
} from './protocol.js';

export interface SocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ChannelOptions {
  socketFactory?: SocketFactory;
  /** Reply wait before a command is considered failed (ms). */
  commandTimeoutMs?: number;
  /** First reconnect delay; doubles per attempt up to the max. */
  reconnectBaseMs?: number;
  reconnectMaxMs?: number;
}

export type ConnectionState = 'connecting' | 'connected' | 'disconnected';

interface Pending {
  resolve: (reply: CommandReply) => void;
  timer: ReturnType<typeof setTimeout>;
}

const OPEN = 1;

export class ControlChannel {
  onStatus: ((status: StatusMessage) => void) | null = null;
  onMonitor: ((monitor: MonitorMessage) => void) | null = null;
  onConnectionChange: ((state: ConnectionState) => void) | null = null;

  private readonly url: string;
  private readonly makeSocket: SocketFactory;
  private readonly commandTimeoutMs: number;
  private readonly reconnectBaseMs: number;
  private readonly reconnectMaxMs: number;

  private socket: SocketLike | null = null;
  private state: ConnectionState = 'disconnected';
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private reconnectAttempts = 0;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private closed = false;

  constructor(url: string, options: ChannelOptions = {}) {
    this.url = url;
    this.makeSocket =
      options.socketFactory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.commandTimeoutMs = options.commandTimeoutMs ?? 500;
    this.reconnectBaseMs = options.reconnectBaseMs ?? 500;
    this.reconnectMaxMs = options.reconnectMaxMs ?? 10000;
  }

  connectionState(): ConnectionState {
    return this.state;
  }

  connect(): void {
    this.closed = false;
    this.openSocket();
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
    this.setState('disconnected');
  }

  /**
   * Send one command; resolves with the engine's reply, or a synthetic
   * failure reply on timeout/disconnect. Never rejects: the UI always
   * gets something displayable.
   */
  send(cmd: string, args?: Record<string, unknown>): Promise<CommandReply> {
    const id = this.nextId++;
    if (!this.socket || this.socket.readyState !== OPEN) {
      return Promise.resolve({ id, ok: false, error: 'not connected' });
    }
    const request = { id, cmd, args };
    return new Promise((resolve) => {
      const timer = setTimeout(() => {
        this.pending.delete(id);
        resolve({ id, ok: false, error: `timeout after ${this.commandTimeoutMs} ms` });
      }, this.commandTimeoutMs);
      this.pending.set(id, { resolve, timer });
      this.socket!.send(JSON.stringify(request));
    });
  }

  private openSocket(): void {
    this.setState('connecting');
    const sock = this.makeSocket(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.reconnectAttempts = 0;
      this.setState('connected');
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onerror = () => {};
    sock.onclose = () => {
      this.failAllPending('connection lost');
      this.setState('disconnected');
      this.scheduleReconnect();
    };
  }

  private handleMessage(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) return;
    if (isStatus(msg)) {
      this.onStatus?.(msg);
    } else if (isMonitor(msg)) {
      this.onMonitor?.(msg);
    } else if (isReply(msg)) {
      const waiting = this.pending.get(msg.id);
      if (waiting) {
        clearTimeout(waiting.timer);
        this.pending.delete(msg.id);
        waiting.resolve(msg);
      }
    }
  }

  private failAllPending(reason: string): void {
    for (const [id, waiting] of this.pending) {
      clearTimeout(waiting.timer);
      waiting.resolve({ id, ok: false, error: reason });
    }
    this.pending.clear();
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    const delay = Math.min(
      this.reconnectBaseMs * 2 ** this.reconnectAttempts,
      this.reconnectMaxMs,
    );
    this.reconnectAttempts += 1;
    this.reconnectTimer = setTimeout(() => this.openSocket(), delay);
  }

  private setState(state: ConnectionState): void {
    if (state === this.state) return;
    this.state = state;
    this.onConnectionChange?.(state);
  }
}
