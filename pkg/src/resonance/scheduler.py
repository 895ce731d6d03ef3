"""Deadline scheduler over a pluggable clock, with sounding-note tracking.

Virtual clock: advanced explicitly, emission is µs-exact and deterministic.
Real clock: a fixed-tick loop (default 1 ms) with deadline lookahead;
lateness is measured per event, never used to drop. Late events are
clamped to now: on stage, a late note beats a missing note.
"""

from __future__ import annotations

import heapq
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Protocol, Tuple

from .events import EngineEvent, Marker, Micros, NoteEvent, PedalEvent, sort_key

DEFAULT_QUEUE_CAPACITY = 65536
DEFAULT_TICK_US = 1000


class SchedulerError(Exception):
    pass


class OverloadError(SchedulerError):
    pass


class ClockMisuseError(SchedulerError):
    pass


class Clock(Protocol):
    def now(self) -> Micros: ...


class VirtualClock:
    """Test/replay clock; advances only when told to."""

    def __init__(self, start: Micros = 0):
        self._now = start

    def now(self) -> Micros:
        return self._now

    def advance_to(self, t: Micros) -> None:
        if t < self._now:
            raise ClockMisuseError(f"clock cannot go backwards ({t} < {self._now})")
        self._now = t

    def advance(self, delta: Micros) -> None:
        self.advance_to(self._now + delta)


class MonotonicClock:
    """Real clock: monotonic µs since construction."""

    def __init__(self):
        self._t0 = time.monotonic_ns()

    def now(self) -> Micros:
        return (time.monotonic_ns() - self._t0) // 1000


class Sink(Protocol):
    def emit(self, t: Micros, kind: str, data1: int, data2: int) -> None: ...
    def close(self) -> None: ...


def event_to_wire(e: EngineEvent) -> Optional[Tuple[str, int, int, bytes]]:
    """(kind, data1, data2, midi bytes) for an emittable event; None for markers."""
    if isinstance(e, NoteEvent):
        if e.kind == "on":
            return ("ON", e.pitch, e.velocity, bytes((0x90, e.pitch, e.velocity)))
        return ("OFF", e.pitch, 0, bytes((0x80, e.pitch, 0)))
    if isinstance(e, PedalEvent):
        return ("CC64", e.value, 0, bytes((0xB0, 64, e.value)))
    return None


def format_line(t: Micros, kind: str, data1: int, data2: int) -> str:
    return f"{t} {kind} {data1} {data2}"


class CollectorSink:
    """Test sink: keeps every emission in memory."""

    def __init__(self):
        self.records: List[Tuple[Micros, str, int, int]] = []

    def emit(self, t, kind, data1, data2):
        self.records.append((t, kind, data1, data2))

    def lines(self) -> List[str]:
        return [format_line(*r) for r in self.records]

    def close(self):
        pass


class FileSink:
    """Golden-file sink: one `<t_us> <ON|OFF|CC64> <d1> <d2>` line per event."""

    def __init__(self, path: str):
        self._fh = open(path, "w", encoding="utf-8", newline="\n")

    def emit(self, t, kind, data1, data2):
        self._fh.write(format_line(t, kind, data1, data2) + "\n")

    def close(self):
        self._fh.close()


class NullSink:
    def emit(self, t, kind, data1, data2):
        pass

    def close(self):
        pass


class TeeSink:
    def __init__(self, *sinks: Sink):
        self._sinks = sinks

    def emit(self, t, kind, data1, data2):
        for s in self._sinks:
            s.emit(t, kind, data1, data2)

    def close(self):
        for s in self._sinks:
            s.close()


class ActiveNoteTable:
    """Per-pitch count of unmatched note-ons among *emitted* events."""

    def __init__(self):
        self._counts: Dict[int, int] = {}

    def note_on(self, pitch: int) -> None:
        self._counts[pitch] = self._counts.get(pitch, 0) + 1

    def note_off(self, pitch: int) -> None:
        n = self._counts.get(pitch, 0)
        if n <= 1:
            self._counts.pop(pitch, None)
        else:
            self._counts[pitch] = n - 1

    def pitches(self) -> set:
        return set(self._counts)

    def counts(self) -> Dict[int, int]:
        return dict(self._counts)

    def __len__(self) -> int:
        return sum(self._counts.values())


class Scheduler:
    """Owns the pending queue and the sink; emission order is event order.

    schedule() and cancel_all() are thread-safe; the sink is only ever
    invoked under the scheduler's lock, preserving a single ordered
    consumer.
    """

    def __init__(self, clock: Clock, sink: Sink,
                 capacity: int = DEFAULT_QUEUE_CAPACITY,
                 tick_us: Micros = DEFAULT_TICK_US,
                 on_emit: Optional[Callable[[EngineEvent, Micros], None]] = None):
        self.clock = clock
        self.sink = sink
        self.capacity = capacity
        self.tick_us = tick_us
        self.active = ActiveNoteTable()
        self.on_emit = on_emit  # called with (event, emit_time) after sink write
        self.lateness_us: List[Micros] = []
        self._heap: List[Tuple[tuple, int, EngineEvent]] = []
        self._seq = 0
        self._lock = threading.RLock()

    def schedule(self, e: EngineEvent) -> None:
        with self._lock:
            now = self.clock.now()
            if e.t <= now:
                self._emit(e, now)
                return
            if len(self._heap) >= self.capacity:
                raise OverloadError(f"pending queue full ({self.capacity})")
            heapq.heappush(self._heap, (sort_key(e), self._seq, e))
            self._seq += 1

    def cancel_all(self) -> int:
        with self._lock:
            n = len(self._heap)
            self._heap.clear()
            return n

    def pending(self) -> int:
        with self._lock:
            return len(self._heap)

    def dispatch_due(self) -> int:
        """Emit every pending event with deadline <= now; returns count."""
        with self._lock:
            now = self.clock.now()
            n = 0
            while self._heap and self._heap[0][2].t <= now:
                _, _, e = heapq.heappop(self._heap)
                self._emit(e, now)
                n += 1
            return n

    def next_deadline(self) -> Optional[Micros]:
        with self._lock:
            return self._heap[0][2].t if self._heap else None

    def run_until(self, t: Micros) -> None:
        """Advance a virtual clock to t, emitting every due event in order."""
        clock = self.clock
        if not isinstance(clock, VirtualClock):
            raise ClockMisuseError("run_until requires a virtual clock")
        with self._lock:
            while self._heap and self._heap[0][2].t <= t:
                _, _, e = heapq.heappop(self._heap)
                if e.t > clock.now():
                    clock.advance_to(e.t)
                self._emit(e, clock.now())
            if t > clock.now():
                clock.advance_to(t)

    def _emit(self, e: EngineEvent, now: Micros) -> None:
        self.lateness_us.append(max(0, now - e.t))
        wire = event_to_wire(e)
        if wire is None:
            return
        kind, d1, d2, _midi = wire
        # Late events are clamped to now; on-time virtual-clock events
        # have now == deadline, keeping logs byte-stable across runs.
        emit_t = max(e.t, now)
        self.sink.emit(emit_t, kind, d1, d2)
        if isinstance(e, NoteEvent):
            if e.kind == "on":
                self.active.note_on(e.pitch)
            else:
                self.active.note_off(e.pitch)
        if self.on_emit is not None:
            self.on_emit(e, emit_t)


class RealTimeLoop:
    """Drives a scheduler against the real clock on a fixed tick."""

    def __init__(self, scheduler: Scheduler, tick_us: Micros = DEFAULT_TICK_US,
                 on_tick: Optional[Callable[[Micros, Micros], None]] = None):
        self.scheduler = scheduler
        self.tick_us = tick_us
        self.on_tick = on_tick  # called with the (t0, t1) window of each tick
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="scheduler", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join()

    def _run(self) -> None:
        last = self.scheduler.clock.now()
        while not self._stop.is_set():
            now = self.scheduler.clock.now()
            if self.on_tick is not None:
                self.on_tick(last, now + self.tick_us)
                last = now + self.tick_us
            self.scheduler.dispatch_due()
            time.sleep(self.tick_us / 1_000_000)
