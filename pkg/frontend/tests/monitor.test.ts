import { describe, expect, it } from 'vitest';

import { EventMonitor } from '../src/monitor.js';
import { MonitorFrame, NotePayload } from '../src/protocol.js';

function noteFrame(direction: 'in' | 'out', t: number, pitch: number,
                   kind: 'on' | 'off' = 'on'): MonitorFrame {
  const event: NotePayload = {
    type: 'note', kind, pitch, velocity: 80, t, source: direction === 'in' ? 'amt' : 'chain',
  };
  return { t, direction, event };
}

describe('EventMonitor', () => {
  it('attributes out note-ons to the oldest unmatched in note-on per pitch', () => {
    const monitor = new EventMonitor();
    monitor.push([
      noteFrame('in', 1_000_000, 60),
      noteFrame('in', 1_100_000, 60),
      noteFrame('out', 1_350_000, 60),
      noteFrame('out', 1_450_000, 60),
    ]);
    expect(monitor.latencies()).toEqual([350_000, 350_000]);
  });

  it('does not attribute across pitches or to note-offs', () => {
    const monitor = new EventMonitor();
    monitor.push([
      noteFrame('in', 0, 60),
      noteFrame('out', 100_000, 61),
      noteFrame('in', 0, 62, 'off'),
      noteFrame('out', 50_000, 62, 'off'),
      noteFrame('out', 200_000, 62),
    ]);
    expect(monitor.latencies()).toEqual([]);
  });

  it('reads a stable median when latencies cluster around channel delay', () => {
    // Simulated stream: ~350 ms transport latency plus a 100 ms delay
    // effect, with a little jitter on the transport side.
    const monitor = new EventMonitor();
    const jitter = [-4_000, -1_500, 0, 2_000, 3_500];
    const frames: MonitorFrame[] = [];
    for (let i = 0; i < jitter.length; i += 1) {
      const t0 = i * 500_000;
      frames.push(noteFrame('in', t0, 60 + i));
      frames.push(noteFrame('out', t0 + 450_000 + jitter[i], 60 + i));
    }
    monitor.push(frames);
    const median = monitor.medianLatencyMs();
    expect(median).not.toBeNull();
    expect(Math.abs(median! - 450)).toBeLessThan(5);
  });

  it('keeps every frame from a coalesced batch in arrival order', () => {
    const monitor = new EventMonitor();
    const batch: MonitorFrame[] = [];
    for (let i = 0; i < 64; i += 1) {
      batch.push(noteFrame(i % 2 === 0 ? 'in' : 'out', i * 1000, 60 + (i % 12)));
    }
    monitor.push(batch);
    expect(monitor.size()).toBe(64);
    const recent = monitor.recent(64);
    expect(recent.map((e) => e.frame.t)).toEqual(batch.map((f) => f.t));
  });

  it('separates lanes and bounds the rolling buffer', () => {
    const monitor = new EventMonitor(10);
    for (let i = 0; i < 30; i += 1) {
      monitor.push([noteFrame(i % 3 === 0 ? 'out' : 'in', i, 60)]);
    }
    expect(monitor.size()).toBe(10);
    const lanes = [...monitor.lane('in', 10), ...monitor.lane('out', 10)];
    expect(lanes).toHaveLength(10);
    for (const entry of monitor.lane('out', 10)) {
      expect(entry.frame.direction).toBe('out');
    }
  });

  it('reports no median before any attributable pair arrives', () => {
    const monitor = new EventMonitor();
    expect(monitor.medianLatencyMs()).toBeNull();
    monitor.push([noteFrame('in', 0, 60)]);
    expect(monitor.medianLatencyMs()).toBeNull();
  });
});
