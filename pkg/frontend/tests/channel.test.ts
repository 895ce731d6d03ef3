import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { ControlChannel } from '../src/channel.js';
import { FakeSocket, MockEngine } from './mock-engine.js';

describe('ControlChannel', () => {
  let engine: MockEngine;

  beforeEach(() => {
    vi.useFakeTimers();
    engine = new MockEngine();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  function connect(channel: ControlChannel): FakeSocket {
    channel.connect();
    const sock = engine.sockets[engine.sockets.length - 1];
    sock.open();
    return sock;
  }

  it('correlates replies to requests by id', async () => {
    const channel = new ControlChannel('ws://test', { socketFactory: engine.factory });
    connect(channel);
    const a = channel.send('set_param', { path: 'delay_ms', value: 250 });
    const b = channel.send('next_cue');
    const [replyA, replyB] = await Promise.all([a, b]);
    expect(replyA.ok).toBe(true);
    expect(replyA.detail).toEqual({ changed: { delay_ms: 250 } });
    expect(replyB.ok).toBe(true);
    expect(replyB.detail).toEqual({ cue: 'Layers' });
    expect(replyA.id).not.toBe(replyB.id);
  });

  it('resolves with a failure reply when not connected', async () => {
    const channel = new ControlChannel('ws://test', { socketFactory: engine.factory });
    const reply = await channel.send('stop');
    expect(reply.ok).toBe(false);
    expect(reply.error).toMatch(/not connected/);
  });

  it('times out silent engines without rejecting', async () => {
    engine.mode = 'silent';
    const channel = new ControlChannel('ws://test', {
      socketFactory: engine.factory,
      commandTimeoutMs: 500,
    });
    connect(channel);
    const promise = channel.send('stop');
    vi.advanceTimersByTime(499);
    let settled = false;
    void promise.then(() => { settled = true; });
    await Promise.resolve();
    expect(settled).toBe(false);
    vi.advanceTimersByTime(1);
    const reply = await promise;
    expect(reply.ok).toBe(false);
    expect(reply.error).toMatch(/timeout/);
  });

  it('fails in-flight commands when the connection drops', async () => {
    engine.mode = 'silent';
    const channel = new ControlChannel('ws://test', { socketFactory: engine.factory });
    const sock = connect(channel);
    const promise = channel.send('stop');
    sock.drop();
    const reply = await promise;
    expect(reply.ok).toBe(false);
    expect(reply.error).toMatch(/connection lost/);
  });

  it('dispatches status and monitor messages to their handlers', () => {
    const channel = new ControlChannel('ws://test', { socketFactory: engine.factory });
    const statuses: unknown[] = [];
    const monitors: unknown[] = [];
    channel.onStatus = (s) => statuses.push(s);
    channel.onMonitor = (m) => monitors.push(m);
    const sock = connect(channel);
    sock.push(engine.status());
    sock.push({ type: 'monitor', frames: [] });
    expect(statuses).toHaveLength(1);
    expect(monitors).toHaveLength(1);
  });

  it('ignores malformed server payloads', () => {
    const channel = new ControlChannel('ws://test', { socketFactory: engine.factory });
    const sock = connect(channel);
    sock.onmessage?.({ data: 'not json at all' });
    sock.onmessage?.({ data: '42' });
    expect(channel.connectionState()).toBe('connected');
  });

  it('reconnects with exponential backoff after a drop', () => {
    const channel = new ControlChannel('ws://test', {
      socketFactory: engine.factory,
      reconnectBaseMs: 500,
      reconnectMaxMs: 10000,
    });
    const sock = connect(channel);
    expect(channel.connectionState()).toBe('connected');

    sock.drop();
    expect(channel.connectionState()).toBe('disconnected');
    expect(engine.sockets).toHaveLength(1);

    vi.advanceTimersByTime(500);
    expect(engine.sockets).toHaveLength(2);

    // second failure waits twice as long
    engine.sockets[1].drop();
    vi.advanceTimersByTime(999);
    expect(engine.sockets).toHaveLength(2);
    vi.advanceTimersByTime(1);
    expect(engine.sockets).toHaveLength(3);

    // a successful open resets the backoff
    engine.sockets[2].open();
    expect(channel.connectionState()).toBe('connected');
    engine.sockets[2].drop();
    vi.advanceTimersByTime(500);
    expect(engine.sockets).toHaveLength(4);
  });

  it('caps the reconnect delay at the configured maximum', () => {
    const channel = new ControlChannel('ws://test', {
      socketFactory: engine.factory,
      reconnectBaseMs: 500,
      reconnectMaxMs: 2000,
    });
    const sock = connect(channel);
    sock.drop();
    for (let i = 0; i < 5; i += 1) {
      vi.advanceTimersByTime(2000);
      engine.sockets[engine.sockets.length - 1].drop();
    }
    const before = engine.sockets.length;
    vi.advanceTimersByTime(2000);
    expect(engine.sockets.length).toBe(before + 1);
  });

  it('stops reconnecting once closed', () => {
    const channel = new ControlChannel('ws://test', { socketFactory: engine.factory });
    const sock = connect(channel);
    sock.drop();
    channel.close();
    vi.advanceTimersByTime(60000);
    expect(engine.sockets).toHaveLength(1);
  });
});
