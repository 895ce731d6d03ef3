"""Timestamped event model and the total ordering used by every stage.

All times are integer microseconds since the engine epoch (monotonic,
never wall-clock). Public tolerances elsewhere are expressed in ms;
keeping integer µs here avoids float drift in scheduling arithmetic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Literal, Optional, Union

# Integer microseconds since engine epoch.
Micros = int

US_PER_MS = 1000


def ms(n: float) -> Micros:
    """Convert milliseconds to integer microseconds."""
    return round(n * US_PER_MS)


@dataclass(frozen=True)
class NoteEvent:
    kind: Literal["on", "off"]
    pitch: int
    velocity: int
    t: Micros
    source: str = "live"  # live | loop | simulator


@dataclass(frozen=True)
class PedalEvent:
    """Sustain pedal (controller 64). value >= 64 means pedal down."""

    value: int
    t: Micros
    source: str = "live"


@dataclass(frozen=True)
class Marker:
    label: str
    t: Micros
    source: str = "live"


EngineEvent = Union[NoteEvent, PedalEvent, Marker]


def validate_event(e: EngineEvent) -> Optional[str]:
    """Return None if the event satisfies all invariants, else the violated field."""
    if e.t < 0:
        return "t"
    if isinstance(e, NoteEvent):
        if not 0 <= e.pitch <= 127:
            return "pitch"
        if e.kind == "on" and not 1 <= e.velocity <= 127:
            return "velocity"
        if e.kind == "off" and e.velocity != 0:
            return "velocity"
        return None
    if isinstance(e, PedalEvent):
        if not 0 <= e.value <= 127:
            return "value"
        return None
    return None


# Rank within one timestamp: note-offs first so a loop copy abutting the
# next can retrigger the same pitch cleanly, then note-ons by pitch,
# then pedal, then markers.
def _kind_rank(e: EngineEvent) -> int:
    if isinstance(e, NoteEvent):
        return 0 if e.kind == "off" else 1
    if isinstance(e, PedalEvent):
        return 2
    return 3


def sort_key(e: EngineEvent) -> tuple:
    if isinstance(e, NoteEvent):
        return (e.t, _kind_rank(e), e.pitch)
    if isinstance(e, PedalEvent):
        return (e.t, 2, e.value)
    return (e.t, 3, 0)


def event_order(a: EngineEvent, b: EngineEvent) -> int:
    """Total order over events: -1 (less), 0 (equal), 1 (greater)."""
    ka, kb = sort_key(a), sort_key(b)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


def shift(e: EngineEvent, delta: Micros) -> EngineEvent:
    return replace(e, t=e.t + delta)


def event_to_json(e: EngineEvent) -> dict:
    if isinstance(e, NoteEvent):
        return {"type": "note", "kind": e.kind, "pitch": e.pitch,
                "velocity": e.velocity, "t": e.t, "source": e.source}
    if isinstance(e, PedalEvent):
        return {"type": "pedal", "value": e.value, "t": e.t, "source": e.source}
    return {"type": "marker", "label": e.label, "t": e.t, "source": e.source}


def event_from_json(d: dict) -> EngineEvent:
    kind = d["type"]
    if kind == "note":
        return NoteEvent(kind=d["kind"], pitch=d["pitch"], velocity=d["velocity"],
                         t=d["t"], source=d.get("source", "live"))
    if kind == "pedal":
        return PedalEvent(value=d["value"], t=d["t"], source=d.get("source", "live"))
    if kind == "marker":
        return Marker(label=d["label"], t=d["t"], source=d.get("source", "live"))
    raise ValueError(f"unknown event type {kind!r}: {json.dumps(d)}")
