"""Append-only session log: every ingested and emitted event, replayable.

Newline-delimited JSON with a header line first: streamable, tolerant of
a truncated final line after a crash, and diff-friendly. Recording
failures degrade recording but never block the pipeline.
"""

from __future__ import annotations

import hashlib
import json
import queue
import threading
import time
from dataclasses import dataclass
from typing import IO, Iterator, List, Optional

from .events import EngineEvent, Micros, event_from_json, event_to_json

LOG_VERSION = 1


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class LogRecord:
    t: Micros
    direction: str  # in | out | command
    payload: dict

    def event(self) -> EngineEvent:
        return event_from_json(self.payload)


class SessionWriter:
    """Dedicated writer thread fed by an ordered queue."""

    def __init__(self, path: str, config_hash: str = "", cue_sheet_hash: str = ""):
        self._fh: Optional[IO[str]] = open(path, "w", encoding="utf-8", newline="\n")
        header = {"log_version": LOG_VERSION, "start_wall": time.time(),
                  "config_hash": config_hash, "cue_sheet_hash": cue_sheet_hash}
        self._fh.write(json.dumps(header) + "\n")
        self._queue: "queue.Queue[Optional[str]]" = queue.Queue()
        self._error: Optional[Exception] = None
        self._thread = threading.Thread(target=self._run, name="session-writer", daemon=True)
        self._thread.start()

    def record(self, t: Micros, direction: str, payload: dict) -> None:
        if self._error is not None:
            return
        self._queue.put(json.dumps({"t": t, "dir": direction, "payload": payload}))

    def record_event(self, e: EngineEvent, direction: str, t: Optional[Micros] = None) -> None:
        self.record(e.t if t is None else t, direction, event_to_json(e))

    def flush(self) -> None:
        self._queue.join()
        if self._fh is not None:
            self._fh.flush()
        if self._error is not None:
            raise self._error

    def close(self) -> None:
        self._queue.put(None)
        self._thread.join()
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _run(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                self._queue.task_done()
                return
            try:
                if self._error is None and self._fh is not None:
                    self._fh.write(item + "\n")
            except OSError as exc:
                self._error = exc
            finally:
                self._queue.task_done()


@dataclass
class SessionLog:
    header: dict
    records: List[LogRecord]

    def in_events(self) -> List[LogRecord]:
        return [r for r in self.records if r.direction == "in"]

    def out_records(self) -> List[LogRecord]:
        return [r for r in self.records if r.direction == "out"]

    def commands(self) -> List[LogRecord]:
        return [r for r in self.records if r.direction == "command"]


def read_session_log(path: str) -> SessionLog:
    """Read a log, ignoring a torn final line (crash tolerance)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = raw.split("\n")
    if raw and not raw.endswith("\n"):
        lines = lines[:-1]  # incomplete tail
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path}: empty session log")
    header = _parse_line(lines[0])
    records = []
    for ln in lines[1:]:
        try:
            d = json.loads(ln)
        except json.JSONDecodeError:
            break  # torn or corrupt tail; keep everything before it
        records.append(LogRecord(t=d["t"], direction=d["dir"], payload=d["payload"]))
    return SessionLog(header=header, records=records)


def _parse_line(line: str) -> dict:
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValueError(f"bad session log header: {exc}") from exc
