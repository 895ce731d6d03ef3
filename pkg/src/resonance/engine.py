"""Engine wiring: chain + cue sheet + scheduler + recording + commands.

The core Engine is single-threaded and clock-agnostic; deterministic runs
(simulate under the virtual clock, replay) drive it directly. Live modes
wrap it in a tick loop fed by thread-safe queues.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

from . import cues as cue_mod
from .cues import (CommandError, ControlCommand, CueSheet, GotoCue, LoopPlay,
                   LoopStartCapture, LoopStop, LoopStopCapture, NextCue,
                   PrevCue, Reset, SetParam, Stop, chain_params,
                   command_to_json, set_param)
from .events import EngineEvent, Micros, event_to_json, validate_event
from .pipeline import EffectChain, PipelineError
from .scheduler import RealTimeLoop, Scheduler, VirtualClock
from .sessionlog import SessionWriter

MonitorFn = Callable[[Micros, str, dict], None]  # (t, in|out, event payload)


class Engine:
    def __init__(self, chain: EffectChain, sheet: CueSheet, scheduler: Scheduler,
                 recorder: Optional[SessionWriter] = None,
                 monitor: Optional[MonitorFn] = None):
        self.chain = chain
        self.sheet = sheet
        self.scheduler = scheduler
        self.recorder = recorder
        self.monitor = monitor
        self._loop_horizon: Micros = scheduler.clock.now()
        sheet.current().apply_to(chain)
        scheduler.on_emit = self._on_emit

    # --- event flow ------------------------------------------------------

    def ingest(self, e: EngineEvent) -> None:
        bad = validate_event(e)
        if bad is not None:
            raise PipelineError(f"invalid event field {bad}: {e!r}")
        if self.recorder is not None:
            self.recorder.record_event(e, "in")
        if self.monitor is not None:
            self.monitor(e.t, "in", event_to_json(e))
        for out in self.chain.process(e):
            self.scheduler.schedule(out)

    def poll_loops(self, until: Micros) -> None:
        """Schedule loop playback with final times in [horizon, until)."""
        if until <= self._loop_horizon:
            return
        for out in self.chain.emit_loop(self._loop_horizon, until):
            self.scheduler.schedule(out)
        self._loop_horizon = until

    def _on_emit(self, e: EngineEvent, emit_t: Micros) -> None:
        if self.recorder is not None:
            self.recorder.record(emit_t, "out", event_to_json(e))
        if self.monitor is not None:
            self.monitor(emit_t, "out", event_to_json(e))

    # --- operator commands ----------------------------------------------

    def apply_command(self, cmd: ControlCommand) -> dict:
        """Apply one command atomically between events; returns what changed.

        Raises CommandError/PipelineError leaving the chain untouched.
        """
        now = self.scheduler.clock.now()
        detail = self._apply(cmd, now)
        if self.recorder is not None:
            self.recorder.record(now, "command", command_to_json(cmd))
        return detail

    def _apply(self, cmd: ControlCommand, now: Micros) -> dict:
        chain, sheet = self.chain, self.sheet
        if isinstance(cmd, SetParam):
            changed = set_param(chain, cmd.path, cmd.value)
            return {"changed": changed, "params": chain_params(chain)}
        if isinstance(cmd, LoopStartCapture):
            chain.loop_capture_start(now)
            return {"loop": "capturing"}
        if isinstance(cmd, LoopStopCapture):
            state = chain.loop_capture_stop(now)
            return {"loop": "playing", "period_ms": state.period_us / 1000,
                    "segment_events": len(state.segment)}
        if isinstance(cmd, LoopPlay):
            chain.loop_play(now, cmd.repeats)
            return {"loop": "playing", "repeats": cmd.repeats}
        if isinstance(cmd, LoopStop):
            chain.loop_stop()
            return {"loop": "idle"}
        if isinstance(cmd, Stop):
            cancelled = self.scheduler.cancel_all()
            for e in chain.stop_all(self.scheduler.active.pitches(), now):
                self.scheduler.schedule(e)
            return {"stopped": True, "cancelled": cancelled}
        if isinstance(cmd, Reset):
            chain.reset()
            sheet.current().apply_to(chain)
            return {"stopped": False, "cue": sheet.current().name,
                    "params": chain_params(chain)}
        if isinstance(cmd, GotoCue):
            preset = sheet.goto(cmd.index)
            preset.apply_to(chain)
            return {"cue": preset.name, "cue_index": sheet.current_index,
                    "params": chain_params(chain)}
        if isinstance(cmd, NextCue):
            return self._apply(GotoCue(sheet.current_index + 1), now)
        if isinstance(cmd, PrevCue):
            return self._apply(GotoCue(sheet.current_index - 1), now)
        raise CommandError(f"unknown command {cmd!r}")

    def status(self) -> dict:
        return {
            "params": chain_params(self.chain),
            "cue_index": self.sheet.current_index,
            "cues": [{"name": c.name, "notes": c.notes, "params": c.params()}
                     for c in self.sheet.cues],
            "active_notes": len(self.scheduler.active),
            "pending": self.scheduler.pending(),
        }

    # --- deterministic driving (virtual clock) ---------------------------

    def run_timeline(self, items: List[Tuple[Micros, Union[EngineEvent, ControlCommand]]],
                     until: Micros) -> None:
        """Drive a virtual-clock engine through timed inputs, then drain.

        Items must be sorted by time; commands apply between events at
        their recorded times.
        """
        clock = self.scheduler.clock
        assert isinstance(clock, VirtualClock)
        for t, item in items:
            self.poll_loops(t)
            self.scheduler.run_until(t)
            if _is_command(item):
                self.apply_command(item)  # type: ignore[arg-type]
            else:
                self.ingest(item)  # type: ignore[arg-type]
        self.poll_loops(until)
        self.scheduler.run_until(until)


def _is_command(item) -> bool:
    return isinstance(item, (SetParam, LoopStartCapture, LoopStopCapture, LoopPlay,
                             LoopStop, Stop, Reset, GotoCue, NextCue, PrevCue))


class LiveEngine:
    """Tick-driven wrapper: thread-safe ingest and command queues.

    One pipeline/scheduler thread owns all chain state; listeners and the
    control server only enqueue. Commands are applied between events,
    never mid-event.
    """

    def __init__(self, engine: Engine, tick_us: Micros = 1000):
        self.engine = engine
        self._events: "queue.Queue[EngineEvent]" = queue.Queue()
        self._commands: "queue.Queue[Tuple[ControlCommand, queue.Queue]]" = queue.Queue()
        self._loop = RealTimeLoop(engine.scheduler, tick_us=tick_us,
                                  on_tick=self._tick)

    def start(self) -> None:
        self._loop.start()

    def stop(self) -> None:
        self._loop.stop()

    def submit_event(self, e: EngineEvent) -> None:
        self._events.put(e)

    def submit_events(self, events: List[EngineEvent]) -> None:
        for e in events:
            self._events.put(e)

    def submit_command(self, cmd: ControlCommand, timeout: float = 2.0) -> dict:
        """Enqueue a command and block for its result."""
        reply: "queue.Queue[Tuple[bool, object]]" = queue.Queue(maxsize=1)
        self._commands.put((cmd, reply))
        ok, result = reply.get(timeout=timeout)
        if not ok:
            raise result  # type: ignore[misc]
        return result  # type: ignore[return-value]

    def panic(self) -> None:
        """Stop everything; used on shutdown and internal failure."""
        try:
            self.engine.apply_command(Stop())
        except Exception:
            pass

    def _tick(self, t0: Micros, t1: Micros) -> None:
        while True:
            try:
                cmd, reply = self._commands.get_nowait()
            except queue.Empty:
                break
            try:
                reply.put((True, self.engine.apply_command(cmd)))
            except Exception as exc:
                reply.put((False, exc))
        while True:
            try:
                e = self._events.get_nowait()
            except queue.Empty:
                break
            self.engine.ingest(e)
        self.engine.poll_loops(t1)
