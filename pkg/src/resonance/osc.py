"""OSC 1.0 codec and the UDP listener that feeds decoded events to the engine.

Supports the standard atom types int32 ('i'), float32 ('f'), string ('s')
and blob ('b'), plus bundles with NTP-style timetags. Everything is
big-endian and 4-byte aligned, per OSC 1.0.

Wire schema carried on top of OSC (any transcription frontend can target it):

    /amt/noteon  ii  (pitch, velocity)
    /amt/noteoff i   (pitch)
    /amt/pedal   i   (value 0-127)
    /amt/marker  s   (label)
"""

from __future__ import annotations

import socket
import struct
import threading
from dataclasses import dataclass, field
from typing import Callable, List, Tuple, Union

from .events import EngineEvent, Marker, Micros, NoteEvent, PedalEvent

IMMEDIATE_TIMETAG = 1  # OSC convention: process on arrival

# Seconds between the NTP epoch (1900) and the Unix epoch (1970).
_NTP_UNIX_DELTA = 2208988800


class OscError(Exception):
    pass


class MalformedPacket(OscError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class SchemaError(OscError):
    """A structurally valid OSC message that doesn't fit the wire schema."""


OscArg = Union[int, float, str, bytes]


@dataclass(frozen=True)
class OscMessage:
    address: str
    args: Tuple[OscArg, ...] = ()


@dataclass(frozen=True)
class OscBundle:
    timetag: int  # 64-bit NTP fixed point; 1 means "immediately"
    elements: Tuple[Union["OscMessage", "OscBundle"], ...] = ()


def _pad_string(s: str) -> bytes:
    b = s.encode("utf-8") + b"\0"
    return b + b"\0" * (-len(b) % 4)


def _pad_blob(b: bytes) -> bytes:
    out = struct.pack(">i", len(b)) + b
    return out + b"\0" * (-len(out) % 4)


def encode_message(m: OscMessage) -> bytes:
    if not m.address.startswith("/"):
        raise OscError(f"address must start with '/': {m.address!r}")
    tags = ","
    payload = b""
    for a in m.args:
        if isinstance(a, bool):
            raise OscError("unsupported arg type: bool")
        if isinstance(a, int):
            if not -(2**31) <= a < 2**31:
                raise OscError(f"int32 out of range: {a}")
            tags += "i"
            payload += struct.pack(">i", a)
        elif isinstance(a, float):
            tags += "f"
            payload += struct.pack(">f", a)
        elif isinstance(a, str):
            tags += "s"
            payload += _pad_string(a)
        elif isinstance(a, bytes):
            tags += "b"
            payload += _pad_blob(a)
        else:
            raise OscError(f"unsupported arg type: {type(a).__name__}")
    return _pad_string(m.address) + _pad_string(tags) + payload


def encode_bundle(b: OscBundle) -> bytes:
    out = _pad_string("#bundle") + struct.pack(">Q", b.timetag)
    for el in b.elements:
        enc = encode_bundle(el) if isinstance(el, OscBundle) else encode_message(el)
        out += struct.pack(">i", len(enc)) + enc
    return out


def encode_packet(p: Union[OscMessage, OscBundle]) -> bytes:
    return encode_bundle(p) if isinstance(p, OscBundle) else encode_message(p)


class _Reader:
    def __init__(self, data: bytes, base: int = 0):
        self.data = data
        self.pos = 0
        self.base = base  # offset of this view inside the outer packet

    def _fail(self, msg: str):
        raise MalformedPacket(msg, self.base + self.pos)

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if self.remaining() < n:
            self._fail(f"truncated: need {n} bytes, have {self.remaining()}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def string(self) -> str:
        end = self.data.find(b"\0", self.pos)
        if end < 0:
            self._fail("unterminated string")
        s = self.data[self.pos:end]
        width = (end - self.pos) + 1
        width += -width % 4
        if self.remaining() < width:
            self._fail("string padding truncated")
        pad = self.data[self.pos + len(s) + 1:self.pos + width]
        if pad.strip(b"\0"):
            self._fail("non-NUL string padding")
        self.pos += width
        try:
            return s.decode("utf-8")
        except UnicodeDecodeError:
            self._fail("invalid UTF-8 in string")

    def int32(self) -> int:
        return struct.unpack(">i", self.take(4))[0]

    def float32(self) -> float:
        return struct.unpack(">f", self.take(4))[0]

    def blob(self) -> bytes:
        n = self.int32()
        if n < 0:
            self._fail("negative blob length")
        b = self.take(n)
        self.take(-n % 4)
        return b


def _decode_message(r: _Reader) -> OscMessage:
    addr = r.string()
    if not addr.startswith("/"):
        raise MalformedPacket(f"address must start with '/': {addr!r}", r.base)
    tags = r.string()
    if not tags.startswith(","):
        raise MalformedPacket("type tag string must start with ','", r.base)
    args: List[OscArg] = []
    for tag in tags[1:]:
        if tag == "i":
            args.append(r.int32())
        elif tag == "f":
            args.append(r.float32())
        elif tag == "s":
            args.append(r.string())
        elif tag == "b":
            args.append(r.blob())
        else:
            raise MalformedPacket(f"unsupported type tag {tag!r}", r.base + r.pos)
    return OscMessage(addr, tuple(args))


def decode_packet(data: bytes) -> Union[OscMessage, OscBundle]:
    return _decode_at(data, 0)


def _decode_at(data: bytes, base: int) -> Union[OscMessage, OscBundle]:
    if len(data) < 4:
        raise MalformedPacket("packet below minimum length", base)
    if len(data) % 4:
        raise MalformedPacket(f"packet length {len(data)} not a multiple of 4", base)
    r = _Reader(data, base)
    if data.startswith(b"#bundle\0"):
        r.take(8)
        timetag = struct.unpack(">Q", r.take(8))[0]
        elements: List[Union[OscMessage, OscBundle]] = []
        while r.remaining():
            n = r.int32()
            if n < 0 or n % 4:
                raise MalformedPacket(f"bad bundle element size {n}", base + r.pos - 4)
            el = r.take(n)
            elements.append(_decode_at(el, base + r.pos - n))
        return OscBundle(timetag, tuple(elements))
    msg = _decode_message(r)
    if r.remaining():
        # Bare concatenated messages must use a bundle instead.
        raise MalformedPacket(f"{r.remaining()} trailing bytes after message", base + r.pos)
    return msg


# --- wire schema ---------------------------------------------------------

NOTEON_ADDR = "/amt/noteon"
NOTEOFF_ADDR = "/amt/noteoff"
PEDAL_ADDR = "/amt/pedal"
MARKER_ADDR = "/amt/marker"


def _expect(m: OscMessage, types: tuple) -> None:
    got = tuple(type(a) for a in m.args)
    if got != types:
        names = "/".join(t.__name__ for t in types) or "none"
        raise SchemaError(f"{m.address}: expected args {names}, got {m.args!r}")


def message_to_event(m: OscMessage, arrival: Micros, source: str = "live") -> EngineEvent:
    """Map a schema message to an EngineEvent stamped at its arrival time."""
    if m.address == NOTEON_ADDR:
        _expect(m, (int, int))
        pitch, vel = m.args
        if not 0 <= pitch <= 127:
            raise SchemaError(f"noteon pitch out of range: {pitch}")
        if not 1 <= vel <= 127:
            raise SchemaError(f"noteon velocity out of range: {vel}")
        return NoteEvent("on", pitch, vel, arrival, source)
    if m.address == NOTEOFF_ADDR:
        _expect(m, (int,))
        (pitch,) = m.args
        if not 0 <= pitch <= 127:
            raise SchemaError(f"noteoff pitch out of range: {pitch}")
        return NoteEvent("off", pitch, 0, arrival, source)
    if m.address == PEDAL_ADDR:
        _expect(m, (int,))
        (value,) = m.args
        if not 0 <= value <= 127:
            raise SchemaError(f"pedal value out of range: {value}")
        return PedalEvent(value, arrival, source)
    if m.address == MARKER_ADDR:
        _expect(m, (str,))
        return Marker(m.args[0], arrival, source)
    raise SchemaError(f"unknown address {m.address!r}")


def event_to_message(e: EngineEvent) -> OscMessage:
    if isinstance(e, NoteEvent):
        if e.kind == "on":
            return OscMessage(NOTEON_ADDR, (e.pitch, e.velocity))
        return OscMessage(NOTEOFF_ADDR, (e.pitch,))
    if isinstance(e, PedalEvent):
        return OscMessage(PEDAL_ADDR, (e.value,))
    return OscMessage(MARKER_ADDR, (e.label,))


def timetag_to_micros(timetag: int, epoch_wall_us: int) -> Micros:
    """Convert an NTP timetag to engine-epoch microseconds.

    epoch_wall_us is the Unix wall-clock time (µs) at engine time zero.
    """
    seconds = (timetag >> 32) - _NTP_UNIX_DELTA
    frac = timetag & 0xFFFFFFFF
    wall_us = seconds * 1_000_000 + (frac * 1_000_000) // 2**32
    return wall_us - epoch_wall_us


def packet_to_events(packet: Union[OscMessage, OscBundle], arrival: Micros,
                     epoch_wall_us: int = 0, source: str = "live") -> List[EngineEvent]:
    """Flatten a decoded packet into events; bundle timetags override arrival."""
    if isinstance(packet, OscMessage):
        return [message_to_event(packet, arrival, source)]
    if packet.timetag == IMMEDIATE_TIMETAG:
        t = arrival
    else:
        t = max(timetag_to_micros(packet.timetag, epoch_wall_us), arrival)
    out: List[EngineEvent] = []
    for el in packet.elements:
        out.extend(packet_to_events(el, t, epoch_wall_us, source))
    return out


class UdpListener:
    """Single-reader datagram listener; decoded events go to a callback.

    Decoding happens on the listener thread, never on the scheduling thread.
    Malformed or off-schema packets are counted and dropped.
    """

    def __init__(self, host: str, port: int, on_events: Callable[[List[EngineEvent]], None],
                 now: Callable[[], Micros], epoch_wall_us: int = 0):
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind((host, port))
        self._sock.settimeout(0.2)
        self._on_events = on_events
        self._now = now
        self._epoch_wall_us = epoch_wall_us
        self._running = False
        self._thread: threading.Thread | None = None
        self.error_count = 0

    @property
    def port(self) -> int:
        return self._sock.getsockname()[1]

    def start(self) -> None:
        self._running = True
        self._thread = threading.Thread(target=self._run, name="osc-listener", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._running = False
        if self._thread:
            self._thread.join()
        self._sock.close()

    def _run(self) -> None:
        while self._running:
            try:
                data, _ = self._sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            arrival = self._now()
            try:
                events = packet_to_events(decode_packet(data), arrival,
                                          self._epoch_wall_us)
            except OscError:
                self.error_count += 1
                continue
            self._on_events(events)
