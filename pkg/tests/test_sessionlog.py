import json

import pytest

from resonance.events import NoteEvent, PedalEvent, event_to_json
from resonance.sessionlog import (SessionWriter, content_hash,
                                  read_session_log)


def test_round_trip(tmp_path):
    path = str(tmp_path / "s.ndjson")
    w = SessionWriter(path, config_hash="abc", cue_sheet_hash="def")
    events = [NoteEvent("on", 60, 90, 1000), NoteEvent("off", 60, 0, 2000),
              PedalEvent(127, 1500)]
    for e in events:
        w.record_event(e, "in")
    w.flush()
    w.close()
    log = read_session_log(path)
    assert log.header["config_hash"] == "abc"
    assert log.header["cue_sheet_hash"] == "def"
    assert len(log.records) == 3
    assert [r.event() for r in log.in_events()] == events


def test_directions_partitioned(tmp_path):
    path = str(tmp_path / "s.ndjson")
    w = SessionWriter(path)
    w.record_event(NoteEvent("on", 60, 90, 10), "in")
    w.record(20, "out", event_to_json(NoteEvent("on", 60, 90, 20)))
    w.record(30, "command", {"cmd": "stop"})
    w.close()
    log = read_session_log(path)
    assert len(log.in_events()) == 1
    assert len(log.out_records()) == 1
    assert len(log.commands()) == 1
    assert log.commands()[0].payload == {"cmd": "stop"}


def test_truncated_tail_tolerated(tmp_path):
    path = str(tmp_path / "s.ndjson")
    w = SessionWriter(path)
    for i in range(5):
        w.record_event(NoteEvent("on", 60 + i, 90, i * 100), "in")
    w.close()
    raw = open(path, "rb").read()
    torn = str(tmp_path / "torn.ndjson")
    with open(torn, "wb") as fh:
        fh.write(raw[:-17])  # rip through the final record
    log = read_session_log(torn)
    assert len(log.records) == 4
    assert [r.payload["pitch"] for r in log.records] == [60, 61, 62, 63]


def test_empty_log_rejected(tmp_path):
    path = tmp_path / "empty.ndjson"
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_session_log(str(path))


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "bad.ndjson"
    path.write_text("not json\n")
    with pytest.raises(ValueError, match="header"):
        read_session_log(str(path))


def test_records_in_order(tmp_path):
    path = str(tmp_path / "s.ndjson")
    w = SessionWriter(path)
    for i in range(100):
        w.record(i, "in", {"n": i})
    w.flush()
    w.close()
    log = read_session_log(path)
    assert [r.t for r in log.records] == list(range(100))


def test_content_hash_stable():
    assert content_hash("x") == content_hash("x")
    assert content_hash("x") != content_hash("y")
    assert len(content_hash("anything")) == 16
