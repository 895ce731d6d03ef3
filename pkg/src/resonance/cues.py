"""Cue presets for the piece's sections, and the operator command set.

A cue sheet is a JSON list of named presets; advancing cues is always
operator-triggered (no score following). Presets are defaults: live
SetParam tweaks may override them until the next cue or Reset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Union

from .events import Micros, ms
from .pipeline import (DEFAULT_MIN_PERIOD_MS, DELAY_RANGE_MS, EffectChain,
                       SPEED_RANGE, VELOCITY_SCALE_RANGE)

PEDAL_MODES = ("pass", "force_on", "force_off", "suppress")

VELOCITY_OFFSET_RANGE = (-127, 127)


class CueSheetError(Exception):
    pass


class CommandError(Exception):
    pass


@dataclass(frozen=True)
class CuePreset:
    name: str
    velocity_scale: float = 1.0
    velocity_offset: int = 0
    delay_ms: float = 0.0
    speed: float = 1.0
    pedal_mode: str = "pass"
    loop_min_period_ms: float = DEFAULT_MIN_PERIOD_MS
    notes: str = ""

    def apply_to(self, chain: EffectChain) -> None:
        chain.velocity_scale = self.velocity_scale
        chain.velocity_offset = self.velocity_offset
        chain.delay_us = ms(self.delay_ms)
        chain.speed = self.speed
        chain.pedal_mode = self.pedal_mode  # type: ignore[assignment]
        chain.loop.min_period_us = ms(self.loop_min_period_ms)

    def params(self) -> dict:
        return {
            "velocity": {"scale": self.velocity_scale, "offset": self.velocity_offset},
            "delay_ms": self.delay_ms,
            "speed": self.speed,
            "pedal_mode": self.pedal_mode,
            "loop": {"min_period_ms": self.loop_min_period_ms},
        }


@dataclass
class CueSheet:
    cues: List[CuePreset]
    current_index: int = 0

    def current(self) -> CuePreset:
        return self.cues[self.current_index]

    def goto(self, index: int) -> CuePreset:
        if not 0 <= index < len(self.cues):
            raise CommandError(f"cue index {index} out of range 0..{len(self.cues) - 1}")
        self.current_index = index
        return self.current()

    @classmethod
    def default(cls) -> "CueSheet":
        return cls(cues=[CuePreset(name="default")])


def _check_range(name: str, value, lo, hi, cue: str) -> None:
    if not lo <= value <= hi:
        raise CueSheetError(f"{name} out of range in cue {cue!r}: {value} (allowed {lo}..{hi})")


def _validate_preset(p: CuePreset) -> None:
    _check_range("velocity scale", p.velocity_scale, *VELOCITY_SCALE_RANGE, cue=p.name)
    _check_range("velocity offset", p.velocity_offset, *VELOCITY_OFFSET_RANGE, cue=p.name)
    _check_range("delay_ms", p.delay_ms, *DELAY_RANGE_MS, cue=p.name)
    _check_range("speed", p.speed, *SPEED_RANGE, cue=p.name)
    if p.pedal_mode not in PEDAL_MODES:
        raise CueSheetError(f"pedal_mode {p.pedal_mode!r} invalid in cue {p.name!r}")
    if p.loop_min_period_ms <= 0:
        raise CueSheetError(f"loop min_period_ms must be positive in cue {p.name!r}")


def load_cue_sheet(text: str) -> CueSheet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CueSheetError(f"parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, list) or not doc:
        raise CueSheetError("cue sheet must be a non-empty JSON list of cues")
    cues: List[CuePreset] = []
    seen = set()
    for i, item in enumerate(doc):
        if not isinstance(item, dict) or "name" not in item:
            raise CueSheetError(f"cue {i} must be an object with a 'name'")
        name = item["name"]
        if name in seen:
            raise CueSheetError(f"duplicate cue name {name!r}")
        seen.add(name)
        vel = item.get("velocity", {})
        preset = CuePreset(
            name=name,
            velocity_scale=float(vel.get("scale", 1.0)),
            velocity_offset=int(vel.get("offset", 0)),
            delay_ms=float(item.get("delay_ms", 0.0)),
            speed=float(item.get("speed", 1.0)),
            pedal_mode=item.get("pedal_mode", "pass"),
            loop_min_period_ms=float(item.get("loop", {}).get("min_period_ms",
                                                             DEFAULT_MIN_PERIOD_MS)),
            notes=item.get("notes", ""),
        )
        _validate_preset(preset)
        cues.append(preset)
    return CueSheet(cues=cues)


# --- operator commands ---------------------------------------------------

@dataclass(frozen=True)
class SetParam:
    path: str
    value: Union[int, float, str]


@dataclass(frozen=True)
class LoopStartCapture:
    pass


@dataclass(frozen=True)
class LoopStopCapture:
    pass


@dataclass(frozen=True)
class LoopPlay:
    repeats: Optional[int] = None  # None = infinite


@dataclass(frozen=True)
class LoopStop:
    pass


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class Reset:
    pass


@dataclass(frozen=True)
class GotoCue:
    index: int


@dataclass(frozen=True)
class NextCue:
    pass


@dataclass(frozen=True)
class PrevCue:
    pass


ControlCommand = Union[SetParam, LoopStartCapture, LoopStopCapture, LoopPlay,
                       LoopStop, Stop, Reset, GotoCue, NextCue, PrevCue]


def parse_command(obj: dict) -> ControlCommand:
    """Build a command from a decoded {cmd, args} wire object."""
    cmd = obj.get("cmd")
    args = obj.get("args") or {}
    try:
        if cmd == "set_param":
            return SetParam(path=args["path"], value=args["value"])
        if cmd == "loop_start_capture":
            return LoopStartCapture()
        if cmd == "loop_stop_capture":
            return LoopStopCapture()
        if cmd == "loop_play":
            return LoopPlay(repeats=args.get("repeats"))
        if cmd == "loop_stop":
            return LoopStop()
        if cmd == "stop":
            return Stop()
        if cmd == "reset":
            return Reset()
        if cmd == "goto_cue":
            return GotoCue(index=int(args["index"]))
        if cmd == "next_cue":
            return NextCue()
        if cmd == "prev_cue":
            return PrevCue()
    except (KeyError, TypeError, ValueError) as exc:
        raise CommandError(f"bad arguments for {cmd!r}: {exc}") from exc
    raise CommandError(f"unknown command {cmd!r}")


def command_to_json(cmd: ControlCommand) -> dict:
    """Inverse of parse_command, for logging and replay."""
    if isinstance(cmd, SetParam):
        return {"cmd": "set_param", "args": {"path": cmd.path, "value": cmd.value}}
    if isinstance(cmd, LoopStartCapture):
        return {"cmd": "loop_start_capture"}
    if isinstance(cmd, LoopStopCapture):
        return {"cmd": "loop_stop_capture"}
    if isinstance(cmd, LoopPlay):
        return {"cmd": "loop_play", "args": {"repeats": cmd.repeats}}
    if isinstance(cmd, LoopStop):
        return {"cmd": "loop_stop"}
    if isinstance(cmd, Stop):
        return {"cmd": "stop"}
    if isinstance(cmd, Reset):
        return {"cmd": "reset"}
    if isinstance(cmd, GotoCue):
        return {"cmd": "goto_cue", "args": {"index": cmd.index}}
    if isinstance(cmd, NextCue):
        return {"cmd": "next_cue"}
    if isinstance(cmd, PrevCue):
        return {"cmd": "prev_cue"}
    raise CommandError(f"unserializable command {cmd!r}")


_PARAM_RANGES = {
    "velocity.scale": VELOCITY_SCALE_RANGE,
    "velocity.offset": VELOCITY_OFFSET_RANGE,
    "delay_ms": DELAY_RANGE_MS,
    "speed": SPEED_RANGE,
}


def set_param(chain: EffectChain, path: str, value) -> dict:
    """Apply one validated parameter update; chain untouched on rejection."""
    if path == "pedal_mode":
        if value not in PEDAL_MODES:
            raise CommandError(f"pedal_mode must be one of {PEDAL_MODES}, got {value!r}")
        chain.pedal_mode = value
        return {"pedal_mode": value}
    if path == "loop.min_period_ms":
        if not isinstance(value, (int, float)) or value <= 0:
            raise CommandError(f"loop.min_period_ms must be positive, got {value!r}")
        chain.loop.min_period_us = ms(value)
        return {"loop.min_period_ms": value}
    if path not in _PARAM_RANGES:
        raise CommandError(f"unknown parameter path {path!r}")
    lo, hi = _PARAM_RANGES[path]
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not lo <= value <= hi:
        raise CommandError(f"{path} must be in [{lo}, {hi}], got {value!r}")
    if path == "velocity.scale":
        chain.velocity_scale = float(value)
    elif path == "velocity.offset":
        chain.velocity_offset = int(value)
    elif path == "delay_ms":
        chain.delay_us = ms(value)
    elif path == "speed":
        chain.speed = float(value)
    return {path: value}


def chain_params(chain: EffectChain) -> dict:
    return {
        "velocity": {"scale": chain.velocity_scale, "offset": chain.velocity_offset},
        "delay_ms": chain.delay_us / 1000,
        "speed": chain.speed,
        "pedal_mode": chain.pedal_mode,
        "loop": {
            "min_period_ms": chain.loop.min_period_us / 1000,
            "mode": chain.loop.mode,
            "period_ms": chain.loop.period_us / 1000,
            "repeats": chain.loop.repeats,
        },
        "stopped": chain.stopped,
    }
