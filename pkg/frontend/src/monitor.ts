// Rolling in/out event buffer with per-event latency attribution.
//
// An out note-on is attributed to the oldest unmatched in note-on with
// the same pitch; the readout is out.t - in.t. Live chains shift events
// by (channel latency + delay), so readouts should cluster there.

import { MonitorFrame, NotePayload } from './protocol.js';

export interface MonitorEntry {
  frame: MonitorFrame;
  latencyUs: number | null; // out note-ons only, where attributable
}

export class EventMonitor {
  private entries: MonitorEntry[] = [];
  private unmatchedIn = new Map<number, number[]>(); // pitch -> in times
  private readonly capacity: number;

  constructor(capacity = 500) {
    this.capacity = capacity;
  }

  push(frames: MonitorFrame[]): void {
    for (const frame of frames) {
      this.entries.push({ frame, latencyUs: this.attribute(frame) });
    }
    if (this.entries.length > this.capacity) {
      this.entries = this.entries.slice(this.entries.length - this.capacity);
    }
  }

  recent(n = 50): MonitorEntry[] {
    return this.entries.slice(-n);
  }

  lane(direction: 'in' | 'out', n = 50): MonitorEntry[] {
    return this.entries.filter((e) => e.frame.direction === direction).slice(-n);
  }

  latencies(): number[] {
    return this.entries
      .filter((e) => e.latencyUs !== null)
      .map((e) => e.latencyUs as number);
  }

  medianLatencyMs(): number | null {
    const xs = this.latencies().slice().sort((a, b) => a - b);
    if (xs.length === 0) return null;
    const mid = Math.floor(xs.length / 2);
    const med = xs.length % 2 ? xs[mid] : (xs[mid - 1] + xs[mid]) / 2;
    return med / 1000;
  }

  size(): number {
    return this.entries.length;
  }

  private attribute(frame: MonitorFrame): number | null {
    if (frame.event.type !== 'note' || (frame.event as NotePayload).kind !== 'on') {
      return null;
    }
    const pitch = (frame.event as NotePayload).pitch;
    if (frame.direction === 'in') {
      const queue = this.unmatchedIn.get(pitch) ?? [];
      queue.push(frame.t);
      this.unmatchedIn.set(pitch, queue);
      return null;
    }
    const queue = this.unmatchedIn.get(pitch);
    if (!queue || queue.length === 0) return null;
    const inTime = queue.shift()!;
    return frame.t - inTime;
  }
}
