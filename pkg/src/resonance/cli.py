"""Single entrypoint: perform, simulate, replay, and metrics subcommands.

Configuration comes from an optional JSON file plus flag overrides; flags
win, so rehearsal tweaks never require editing files. Startup is
fail-fast: every file, socket and sink is opened and validated before any
event flows.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from .control import ControlServer
from .cues import CueSheet, CueSheetError, load_cue_sheet, parse_command
from .engine import Engine, LiveEngine
from .events import EngineEvent, Micros
from .osc import UdpListener, message_to_event
from .pipeline import EffectChain
from .scheduler import (FileSink, MonotonicClock, NullSink, Scheduler, Sink,
                        TeeSink, VirtualClock)
from .sessionlog import SessionWriter, content_hash, read_session_log
from .simulator import SimConfig, simulate
from .smf import parse_smf
from .metrics import onset_f1

log = logging.getLogger("resonance")


class ConfigError(Exception):
    pass


@dataclass
class EngineConfig:
    listen: Tuple[str, int] = ("0.0.0.0", 9000)
    control: Tuple[str, int] = ("127.0.0.1", 9001)
    sink: str = "null"  # midi:NAME | file:PATH | null
    virtual_clock: bool = False
    cues_path: Optional[str] = None
    record_path: Optional[str] = None
    seed: int = 0
    queue_capacity: int = 65536
    tick_ms: float = 1.0
    sim: SimConfig = field(default_factory=SimConfig)


def _parse_hostport(s: str) -> Tuple[str, int]:
    host, _, port = s.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"expected HOST:PORT, got {s!r}")
    return host, int(port)


def load_config(args: argparse.Namespace) -> EngineConfig:
    cfg = EngineConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config {args.config}: {exc}") from exc
        if "listen" in doc:
            cfg.listen = _parse_hostport(doc["listen"])
        if "control" in doc:
            cfg.control = _parse_hostport(doc["control"])
        cfg.sink = doc.get("sink", cfg.sink)
        cfg.cues_path = doc.get("cues", cfg.cues_path)
        cfg.record_path = doc.get("record", cfg.record_path)
        cfg.seed = doc.get("seed", cfg.seed)
        cfg.queue_capacity = doc.get("queue_capacity", cfg.queue_capacity)
        cfg.tick_ms = doc.get("tick_ms", cfg.tick_ms)
        if "sim" in doc:
            cfg.sim = SimConfig(**doc["sim"])
    if getattr(args, "listen", None):
        cfg.listen = _parse_hostport(args.listen)
    if getattr(args, "control", None):
        cfg.control = _parse_hostport(args.control)
    if getattr(args, "sink", None):
        cfg.sink = args.sink
    if getattr(args, "virtual_clock", False):
        cfg.virtual_clock = True
    if getattr(args, "cues", None):
        cfg.cues_path = args.cues
    if getattr(args, "record", None):
        cfg.record_path = args.record
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.sim = SimConfig(**{**cfg.sim.__dict__, "seed": args.seed})
    return cfg


def make_sink(spec: str) -> Sink:
    if spec == "null":
        return NullSink()
    if spec.startswith("file:"):
        return FileSink(spec[5:])
    if spec.startswith("midi:"):
        try:
            import rtmidi  # type: ignore[import-not-found]
        except ImportError as exc:
            raise ConfigError("midi sink requires the python-rtmidi package") from exc
        return _MidiPortSink(spec[5:], rtmidi)
    raise ConfigError(f"unknown sink {spec!r} (expected midi:NAME, file:PATH or null)")


class _MidiPortSink:
    """Virtual MIDI port sink; same byte-level messages as the file sink lines."""

    def __init__(self, name: str, rtmidi_mod):
        self._out = rtmidi_mod.MidiOut()
        self._out.open_virtual_port(name)

    def emit(self, t, kind, data1, data2):
        if kind == "ON":
            self._out.send_message([0x90, data1, data2])
        elif kind == "OFF":
            self._out.send_message([0x80, data1, 0])
        elif kind == "CC64":
            self._out.send_message([0xB0, 64, data1])

    def close(self):
        self._out.close_port()


def load_sheet(cfg: EngineConfig) -> Tuple[CueSheet, str]:
    if cfg.cues_path is None:
        return CueSheet.default(), ""
    try:
        with open(cfg.cues_path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cue sheet {cfg.cues_path}: {exc}") from exc
    return load_cue_sheet(text), content_hash(text)


def _build_engine(cfg: EngineConfig, clock, sink: Sink,
                  monitor=None) -> Tuple[Engine, Optional[SessionWriter]]:
    sheet, sheet_hash = load_sheet(cfg)
    recorder = None
    if cfg.record_path:
        recorder = SessionWriter(cfg.record_path,
                                 config_hash=content_hash(repr(cfg)),
                                 cue_sheet_hash=sheet_hash)
    scheduler = Scheduler(clock, sink, capacity=cfg.queue_capacity,
                          tick_us=round(cfg.tick_ms * 1000))
    engine = Engine(EffectChain(), sheet, scheduler, recorder=recorder, monitor=monitor)
    return engine, recorder


def _drain_virtual(engine: Engine, last_t: Micros) -> None:
    """Advance until nothing is pending; bounded when loops run forever."""
    horizon = last_t
    for _ in range(120):
        horizon += 1_000_000
        engine.poll_loops(horizon)
        engine.scheduler.run_until(horizon)
        if engine.scheduler.pending() == 0 and engine.chain.loop.mode != "playing":
            return


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    with open(args.score, "rb") as fh:
        score = parse_smf(fh.read())
    stream = simulate(score, cfg.sim)
    sink = make_sink(cfg.sink)

    if cfg.virtual_clock:
        clock = VirtualClock()
        engine, recorder = _build_engine(cfg, clock, sink)
        items: List[Tuple[Micros, EngineEvent]] = []
        for t, msg in stream:
            items.append((t, message_to_event(msg, t, source="simulator")))
        engine.run_timeline(items, until=items[-1][0] if items else 0)
        _drain_virtual(engine, items[-1][0] if items else 0)
        if recorder:
            recorder.flush()
            recorder.close()
        sink.close()
        return 0

    # Real-time: in-process sender paces the stream into the live engine.
    clock = MonotonicClock()
    server = None
    engine, recorder = _build_engine(cfg, clock, sink)
    live = LiveEngine(engine, tick_us=round(cfg.tick_ms * 1000))
    if getattr(args, "control", None) or cfg.control:
        server = ControlServer(live, cfg.control[0], cfg.control[1])
        engine.monitor = server.monitor
        server.start()
        log.info("control channel on ws://%s:%d", server.host, server.port)
    live.start()
    try:
        for t_us, msg in stream:
            delay = t_us / 1_000_000 - clock.now() / 1_000_000
            if delay > 0:
                time.sleep(delay)
            live.submit_event(message_to_event(msg, clock.now(), source="simulator"))
        time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        live.panic()
        time.sleep(0.05)
        live.stop()
        if server:
            server.stop()
        if recorder:
            recorder.flush()
            recorder.close()
        sink.close()
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    session = read_session_log(args.log)
    sheet, sheet_hash = load_sheet(cfg)
    if session.header.get("cue_sheet_hash") and sheet_hash and \
            session.header["cue_sheet_hash"] != sheet_hash:
        print("error: cue sheet does not match the one recorded in the session",
              file=sys.stderr)
        return 2
    sink = make_sink(cfg.sink)
    clock = VirtualClock()
    recorder = None
    if cfg.record_path:
        recorder = SessionWriter(cfg.record_path,
                                 config_hash=session.header.get("config_hash", ""),
                                 cue_sheet_hash=sheet_hash)
    scheduler = Scheduler(clock, sink, capacity=cfg.queue_capacity)
    engine = Engine(EffectChain(), sheet, scheduler, recorder=recorder)
    items: List[Tuple[Micros, object]] = []
    for rec in session.records:
        if rec.direction == "in":
            items.append((rec.t, rec.event()))
        elif rec.direction == "command":
            items.append((rec.t, parse_command(rec.payload)))
    items.sort(key=lambda it: it[0])
    last_t = items[-1][0] if items else 0
    engine.run_timeline(items, until=last_t)  # type: ignore[arg-type]
    _drain_virtual(engine, last_t)
    if recorder:
        recorder.flush()
        recorder.close()
    sink.close()

    if args.verify:
        reproduced = read_session_log(cfg.record_path).out_records() if cfg.record_path else []
        original = session.out_records()
        if cfg.record_path is None:
            print("error: --verify requires --record", file=sys.stderr)
            return 2
        if [(r.t, r.payload) for r in reproduced] != [(r.t, r.payload) for r in original]:
            print("replay mismatch: out-records differ from the original session",
                  file=sys.stderr)
            return 1
        print("replay verified: out-records identical")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    session = read_session_log(args.log)
    with open(args.score, "rb") as fh:
        score = parse_smf(fh.read())
    transcribed = []
    for rec in session.in_events():
        p = rec.payload
        if p.get("type") == "note" and p.get("kind") == "on":
            transcribed.append((p["t"], p["pitch"]))
    # Remove the channel's constant latency before matching, if requested.
    shift = round(args.latency_ms * 1000)
    transcribed = [(t - shift, p) for t, p in transcribed]
    result = onset_f1(score.onsets(), transcribed, tol_ms=args.tol_ms)
    print(json.dumps(result.as_dict(), indent=2))
    return 0


def cmd_perform(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    # Fail-fast: cue sheet and sink validated before any socket binds.
    sink = make_sink(cfg.sink)
    clock = MonotonicClock()
    try:
        engine, recorder = _build_engine(cfg, clock, sink)
    except (ConfigError, CueSheetError):
        sink.close()
        raise
    live = LiveEngine(engine, tick_us=round(cfg.tick_ms * 1000))
    server = ControlServer(live, cfg.control[0], cfg.control[1])
    engine.monitor = server.monitor
    listener = UdpListener(cfg.listen[0], cfg.listen[1], live.submit_events,
                           now=clock.now)
    try:
        server.start()
    except OSError:
        listener.stop()
        sink.close()
        raise
    live.start()
    listener.start()
    log.info("listening for OSC on udp://%s:%d, control on ws://%s:%d",
             cfg.listen[0], listener.port, server.host, server.port)

    stop_flag = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop_flag.set())
    signal.signal(signal.SIGTERM, lambda *_: stop_flag.set())
    try:
        while not stop_flag.is_set():
            time.sleep(0.2)
    finally:
        # Stage safety: always flush note-offs before exiting.
        live.panic()
        time.sleep(0.05)
        listener.stop()
        live.stop()
        server.stop()
        if recorder:
            recorder.flush()
            recorder.close()
        sink.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="engine",
                                description="Interactive piano engine")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--listen", help="OSC UDP bind HOST:PORT")
        sp.add_argument("--control", help="control channel bind HOST:PORT")
        sp.add_argument("--sink", help="midi:NAME | file:PATH | null")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--cues", help="cue sheet JSON path")
        sp.add_argument("--record", help="session log output path")

    sp = sub.add_parser("perform", help="live engine: UDP in, sink out, control up")
    common(sp)
    sp.set_defaults(fn=cmd_perform)

    sp = sub.add_parser("simulate", help="stream a reference score through the engine")
    common(sp)
    sp.add_argument("--score", required=True, help="Standard MIDI File")
    sp.add_argument("--virtual-clock", action="store_true",
                    help="deterministic run, no real time elapses")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("replay", help="re-run a recorded session deterministically")
    common(sp)
    sp.add_argument("--log", required=True, help="session log to replay")
    sp.add_argument("--verify", action="store_true",
                    help="compare reproduced out-records with the original")
    sp.set_defaults(fn=cmd_replay)

    sp = sub.add_parser("metrics", help="onset precision/recall/F1 for a session")
    sp.add_argument("--log", required=True)
    sp.add_argument("--score", required=True)
    sp.add_argument("--tol-ms", type=float, default=50.0)
    sp.add_argument("--latency-ms", type=float, default=0.0,
                    help="constant channel latency to subtract before matching")
    sp.set_defaults(fn=cmd_metrics)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("ENGINE_LOG_LEVEL", "INFO"),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CueSheetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
