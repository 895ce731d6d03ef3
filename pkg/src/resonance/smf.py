"""Standard MIDI File reader (format 0/1) producing a µs-resolved note list.

Handles running status and multi-track merge with a single tempo map.
Velocity-0 note-ons are normalized to note-offs on ingest. SMPTE time
division is not supported.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import List, Tuple

from .events import Micros, NoteEvent

DEFAULT_US_PER_QUARTER = 500000  # 120 bpm


class SmfError(Exception):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass
class ReferenceScore:
    """Ordered note events with ideal times; the stand-in for the live part."""

    notes: List[NoteEvent]

    def onsets(self) -> List[Tuple[Micros, int]]:
        return [(n.t, n.pitch) for n in self.notes if n.kind == "on"]

    def duration_us(self) -> Micros:
        return max((n.t for n in self.notes), default=0)

    def is_balanced(self) -> bool:
        open_counts: dict[int, int] = {}
        for n in self.notes:
            if n.kind == "on":
                open_counts[n.pitch] = open_counts.get(n.pitch, 0) + 1
            else:
                if open_counts.get(n.pitch, 0) <= 0:
                    return False
                open_counts[n.pitch] -= 1
        return not any(open_counts.values())


def _read_varlen(data: bytes, pos: int) -> Tuple[int, int]:
    value = 0
    for i in range(4):
        if pos >= len(data):
            raise SmfError("truncated variable-length quantity", pos)
        b = data[pos]
        pos += 1
        value = (value << 7) | (b & 0x7F)
        if not b & 0x80:
            return value, pos
    raise SmfError("variable-length quantity too long", pos)


def _parse_track(data: bytes, base: int) -> List[Tuple[int, int, tuple]]:
    """Returns (abs_tick, order, payload) items; payload is ('tempo', us_per_qn)
    or ('note', kind, pitch, velocity)."""
    out: List[Tuple[int, int, tuple]] = []
    pos = 0
    tick = 0
    status = None
    order = 0
    while pos < len(data):
        delta, pos = _read_varlen(data, pos)
        tick += delta
        if pos >= len(data):
            raise SmfError("truncated event", base + pos)
        b = data[pos]
        if b & 0x80:
            status = b
            pos += 1
        elif status is None:
            raise SmfError(f"data byte 0x{b:02x} with no running status", base + pos)
        if status == 0xFF:
            if pos >= len(data):
                raise SmfError("truncated meta event", base + pos)
            meta_type = data[pos]
            pos += 1
            length, pos = _read_varlen(data, pos)
            if pos + length > len(data):
                raise SmfError("meta event runs past track end", base + pos)
            payload = data[pos:pos + length]
            pos += length
            if meta_type == 0x51:
                if length != 3:
                    raise SmfError("set-tempo meta must be 3 bytes", base + pos - length)
                out.append((tick, order, ("tempo", int.from_bytes(payload, "big"))))
                order += 1
            elif meta_type == 0x2F:
                break
            status = None  # meta events clear running status
        elif status in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos)
            pos += length
            status = None
        else:
            kind = status & 0xF0
            n_data = 1 if kind in (0xC0, 0xD0) else 2
            if pos + n_data > len(data):
                raise SmfError("truncated channel event", base + pos)
            d = data[pos:pos + n_data]
            pos += n_data
            if kind == 0x90:
                if d[1] == 0:
                    out.append((tick, order, ("note", "off", d[0], 0)))
                else:
                    out.append((tick, order, ("note", "on", d[0], d[1])))
                order += 1
            elif kind == 0x80:
                out.append((tick, order, ("note", "off", d[0], 0)))
                order += 1
    return out


def parse_smf(data: bytes) -> ReferenceScore:
    if len(data) < 14 or data[:4] != b"MThd":
        raise SmfError("missing MThd header", 0)
    hlen = struct.unpack(">I", data[4:8])[0]
    if hlen < 6:
        raise SmfError(f"bad header length {hlen}", 4)
    fmt, ntracks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise SmfError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise SmfError("SMPTE time division not supported", 12)
    if division == 0:
        raise SmfError("zero ticks per quarter", 12)

    pos = 8 + hlen
    items: List[Tuple[int, int, int, tuple]] = []  # (tick, track, order, payload)
    for tno in range(ntracks):
        if pos + 8 > len(data):
            raise SmfError(f"missing track chunk {tno}", pos)
        if data[pos:pos + 4] != b"MTrk":
            raise SmfError(f"expected MTrk chunk, got {data[pos:pos+4]!r}", pos)
        tlen = struct.unpack(">I", data[pos + 4:pos + 8])[0]
        if pos + 8 + tlen > len(data):
            raise SmfError(f"track {tno} runs past end of file", pos + 4)
        body = data[pos + 8:pos + 8 + tlen]
        for tick, order, payload in _parse_track(body, pos + 8):
            items.append((tick, tno, order, payload))
        pos += 8 + tlen

    # Single merged timeline; tempo changes apply before notes at the same tick.
    items.sort(key=lambda it: (it[0], 0 if it[3][0] == "tempo" else 1, it[1], it[2]))
    notes: List[NoteEvent] = []
    us_per_qn = DEFAULT_US_PER_QUARTER
    last_tick = 0
    last_us = 0
    for tick, _tno, _order, payload in items:
        t_us = last_us + (tick - last_tick) * us_per_qn // division
        if payload[0] == "tempo":
            last_tick, last_us = tick, t_us
            us_per_qn = payload[1]
        else:
            _, kind, pitch, vel = payload
            notes.append(NoteEvent(kind, pitch, vel, t_us, source="score"))
    return ReferenceScore(notes=notes)
