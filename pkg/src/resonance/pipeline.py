"""The six live transforms, composable over one effect chain.

Stage order is fixed: loop capture tap -> velocity -> speed (loop-segment
playback only) -> delay -> pedal mode -> stop gate. Per-event pure maps
commute, so the fixed order is a documentation choice, not a constraint.

Speed never applies to live pass-through material: time-scaling an
unbounded live stream would need unbounded buffering. It scales loop
playback, where the segment is finite and anchored.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional, Set, Tuple

from .events import (EngineEvent, Marker, Micros, NoteEvent, PedalEvent, ms,
                     sort_key)

PedalMode = Literal["pass", "force_on", "force_off", "suppress"]

VELOCITY_SCALE_RANGE = (0.0, 4.0)
DELAY_RANGE_MS = (0, 60000)
SPEED_RANGE = (0.25, 4.0)
DEFAULT_MIN_PERIOD_MS = 1000


class PipelineError(Exception):
    pass


class LoopStateError(PipelineError):
    pass


class EmptyLoopError(PipelineError):
    pass


def apply_velocity(e: NoteEvent, scale: float, offset: int) -> NoteEvent:
    """Scale+offset note-on velocity, clamped to [1, 127]; off-events unchanged.

    Floor is 1, not 0: a velocity-0 note-on reads as note-off in MIDI
    running semantics, so even "silent" dynamics stay valid note-ons.
    """
    if e.kind != "on":
        return e
    v = round(e.velocity * scale + offset)
    return replace(e, velocity=max(1, min(127, v)))


def apply_delay(e: EngineEvent, delay_us: Micros) -> EngineEvent:
    return replace(e, t=e.t + delay_us)


def apply_speed(segment: List[EngineEvent], factor: float, anchor: Micros) -> List[EngineEvent]:
    """Rescale times around anchor: factor 2.0 halves every interval."""
    return [replace(e, t=anchor + round((e.t - anchor) / factor)) for e in segment]


def apply_pedal_mode(e: PedalEvent, mode: PedalMode) -> Optional[PedalEvent]:
    if mode == "pass":
        return e
    if mode == "force_on":
        return replace(e, value=127)
    if mode == "force_off":
        return replace(e, value=0)
    if mode == "suppress":
        return None
    raise PipelineError(f"unknown pedal mode {mode!r}")


@dataclass
class LoopState:
    mode: Literal["idle", "capturing", "playing"] = "idle"
    # Segment events carry times relative to capture start, with
    # boundary note-offs synthesized for notes still sounding at the end.
    segment: List[EngineEvent] = field(default_factory=list)
    repeats: Optional[int] = None  # None = infinite
    period_us: Micros = 0
    min_period_us: Micros = ms(DEFAULT_MIN_PERIOD_MS)
    capture_start: Micros = 0
    play_start: Micros = 0


@dataclass
class EffectChain:
    velocity_scale: float = 1.0
    velocity_offset: int = 0
    delay_us: Micros = 0
    speed: float = 1.0
    pedal_mode: PedalMode = "pass"
    loop: LoopState = field(default_factory=LoopState)
    stopped: bool = False

    def validate(self) -> None:
        lo, hi = VELOCITY_SCALE_RANGE
        if not lo <= self.velocity_scale <= hi:
            raise PipelineError(f"velocity scale {self.velocity_scale} outside [{lo}, {hi}]")
        if not ms(DELAY_RANGE_MS[0]) <= self.delay_us <= ms(DELAY_RANGE_MS[1]):
            raise PipelineError(f"delay {self.delay_us}us outside range")
        if not SPEED_RANGE[0] <= self.speed <= SPEED_RANGE[1]:
            raise PipelineError(f"speed {self.speed} outside {SPEED_RANGE}")

    # --- loop control ----------------------------------------------------

    def loop_capture_start(self, now: Micros) -> None:
        if self.loop.mode != "idle":
            raise LoopStateError(f"capture start while {self.loop.mode}")
        self.loop.segment = []
        self.loop.mode = "capturing"
        self.loop.capture_start = now

    def loop_capture_stop(self, now: Micros, repeats: Optional[int] = None) -> LoopState:
        if self.loop.mode != "capturing":
            raise LoopStateError(f"capture stop while {self.loop.mode}")
        if not self.loop.segment:
            self.loop.mode = "idle"
            raise EmptyLoopError("nothing captured")
        span = max(e.t for e in self.loop.segment)
        self.loop.period_us = max(span, self.loop.min_period_us)
        self.loop.segment = _close_segment(self.loop.segment, self.loop.period_us)
        self.loop.mode = "playing"
        self.loop.repeats = repeats
        self.loop.play_start = now
        return self.loop

    def loop_play(self, now: Micros, repeats: Optional[int] = None) -> None:
        """(Re)start playback of the captured segment from now."""
        if not self.loop.segment:
            raise EmptyLoopError("no captured segment to play")
        if self.loop.mode == "capturing":
            raise LoopStateError("stop capture before playing")
        self.loop.mode = "playing"
        self.loop.repeats = repeats
        self.loop.play_start = now

    def loop_stop(self) -> None:
        self.loop.mode = "idle"

    # --- stream processing -----------------------------------------------

    def process(self, e: EngineEvent) -> List[EngineEvent]:
        """Run one live event through the chain; returns the events to schedule."""
        if self.loop.mode == "capturing" and not isinstance(e, Marker):
            self.loop.segment.append(replace(e, t=e.t - self.loop.capture_start))
        if self.stopped:
            return []
        if isinstance(e, NoteEvent):
            e = apply_velocity(e, self.velocity_scale, self.velocity_offset)
            return [apply_delay(e, self.delay_us)]
        if isinstance(e, PedalEvent):
            out = apply_pedal_mode(e, self.pedal_mode)
            return [apply_delay(out, self.delay_us)] if out is not None else []
        return [apply_delay(e, self.delay_us)]

    def emit_loop(self, t0: Micros, t1: Micros) -> List[EngineEvent]:
        """Loop playback output whose final (post-transform) time falls in [t0, t1).

        Windows are additive: emit over [0,T) equals emit over [0,t) + [t,T).
        """
        lp = self.loop
        if self.stopped or lp.mode != "playing" or not lp.segment or t1 <= t0:
            return []
        out: List[Tuple[tuple, EngineEvent]] = []
        period, speed, delay = lp.period_us, self.speed, self.delay_us
        # Final time of a copy-k event: play_start + (k*period + rel)/speed + delay.
        # Invert the window bounds to a conservative k range.
        lo = (t0 - lp.play_start - delay) * speed
        hi = (t1 - lp.play_start - delay) * speed
        k_min = max(0, int((lo - period) // period) - 1)
        k_max = int(hi // period) + 1
        if lp.repeats is not None:
            k_max = min(k_max, lp.repeats - 1)
        for k in range(k_min, k_max + 1):
            for ev in lp.segment:
                t_final = lp.play_start + round((k * period + ev.t) / speed) + delay
                if not t0 <= t_final < t1:
                    continue
                ev2 = replace(ev, t=t_final, source="loop")
                if isinstance(ev2, NoteEvent):
                    ev2 = apply_velocity(ev2, self.velocity_scale, self.velocity_offset)
                elif isinstance(ev2, PedalEvent):
                    ped = apply_pedal_mode(ev2, self.pedal_mode)
                    if ped is None:
                        continue
                    ev2 = ped
                out.append((sort_key(ev2), ev2))
        out.sort(key=lambda pair: pair[0])
        return [ev for _, ev in out]

    def stop_all(self, active_pitches: Set[int], now: Micros) -> List[EngineEvent]:
        """Halt everything: flush note-offs for sounding pitches, lift the pedal."""
        self.stopped = True
        self.loop.mode = "idle"
        out: List[EngineEvent] = [NoteEvent("off", p, 0, now, "live")
                                  for p in sorted(active_pitches)]
        out.append(PedalEvent(0, now, "live"))
        return out

    def reset(self) -> None:
        self.stopped = False


def _close_segment(segment: List[EngineEvent], period_us: Micros) -> List[EngineEvent]:
    """Synthesize boundary note-offs for notes still sounding at segment end.

    The off lands exactly on the copy boundary; the off-before-on ordering
    rule then allows a clean retrigger when copies abut.
    """
    open_counts: dict[int, int] = {}
    for e in segment:
        if isinstance(e, NoteEvent):
            if e.kind == "on":
                open_counts[e.pitch] = open_counts.get(e.pitch, 0) + 1
            elif open_counts.get(e.pitch, 0) > 0:
                open_counts[e.pitch] -= 1
    closed = list(segment)
    for pitch, n in sorted(open_counts.items()):
        closed.extend(NoteEvent("off", pitch, 0, period_us, "loop") for _ in range(n))
    return closed
