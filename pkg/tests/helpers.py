"""Shared test utilities: SMF building and score generation.

The SMF writer lives here, independent of the parser it exercises, so
dual-encoding tests stay honest.
"""

from __future__ import annotations

import random
import struct
from typing import List, Optional, Tuple

from resonance.events import NoteEvent
from resonance.smf import ReferenceScore


def varlen(n: int) -> bytes:
    out = [n & 0x7F]
    n >>= 7
    while n:
        out.append((n & 0x7F) | 0x80)
        n >>= 7
    return bytes(reversed(out))


def build_smf(events: List[Tuple[int, bytes]], division: int = 480,
              fmt: int = 0, extra_tracks: Optional[List[List[Tuple[int, bytes]]]] = None) -> bytes:
    """events: list of (abs_tick, raw event bytes incl. status)."""
    tracks = [events] + (extra_tracks or [])
    body = b""
    for trk in tracks:
        t = b""
        last = 0
        for tick, ev in sorted(trk, key=lambda x: x[0]):
            t += varlen(tick - last) + ev
            last = tick
        t += varlen(0) + b"\xff\x2f\x00"
        body += b"MTrk" + struct.pack(">I", len(t)) + t
    ntracks = len(tracks)
    if ntracks > 1:
        fmt = 1
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, ntracks, division)
    return header + body


def note_on(pitch: int, vel: int) -> bytes:
    return bytes((0x90, pitch, vel))


def note_off(pitch: int) -> bytes:
    return bytes((0x80, pitch, 0))


def tempo(us_per_qn: int) -> bytes:
    return b"\xff\x51\x03" + us_per_qn.to_bytes(3, "big")


def make_score(n_notes: int, duration_us: int, seed: int = 1,
               velocity: int = 80) -> ReferenceScore:
    """Evenly spaced balanced score with deterministic pitches."""
    rng = random.Random(seed)
    notes: List[NoteEvent] = []
    spacing = duration_us // max(n_notes, 1)
    length = max(spacing // 2, 1000)
    for i in range(n_notes):
        pitch = 36 + rng.randrange(0, 60)
        t = i * spacing
        notes.append(NoteEvent("on", pitch, velocity, t, "score"))
        notes.append(NoteEvent("off", pitch, 0, t + length, "score"))
    notes.sort(key=lambda n: (n.t, 0 if n.kind == "off" else 1, n.pitch))
    return ReferenceScore(notes=notes)


def score_to_smf(score: ReferenceScore, division: int = 480,
                 us_per_qn: int = 500000) -> bytes:
    """Encode a µs score as SMF (ticks rounded to the division grid)."""
    events: List[Tuple[int, bytes]] = [(0, tempo(us_per_qn))]
    for n in score.notes:
        tick = round(n.t * division / us_per_qn)
        if n.kind == "on":
            events.append((tick, note_on(n.pitch, n.velocity)))
        else:
            events.append((tick, note_off(n.pitch)))
    return build_smf(events, division=division)
