import copy
import json

import pytest

from resonance.cues import (CommandError, CueSheet, CueSheetError, GotoCue,
                            LoopPlay, NextCue, PrevCue, SetParam, Stop,
                            chain_params, command_to_json, load_cue_sheet,
                            parse_command, set_param)
from resonance.events import ms
from resonance.pipeline import EffectChain

SHEET = json.dumps([
    {"name": "Opening", "velocity": {"scale": 0.8, "offset": 0}, "delay_ms": 0,
     "speed": 1.0, "pedal_mode": "pass", "loop": {"min_period_ms": 1000},
     "notes": "soft shadowing"},
    {"name": "Resonance", "velocity": {"scale": 1.0, "offset": 10},
     "delay_ms": 1000, "speed": 1.0, "pedal_mode": "force_on",
     "loop": {"min_period_ms": 1000}, "notes": "loop + delay layers"},
    {"name": "Coda", "velocity": {"scale": 0.5, "offset": 0}, "delay_ms": 250,
     "speed": 0.5, "pedal_mode": "suppress", "loop": {"min_period_ms": 2000}},
])


def test_load_happy_path():
    sheet = load_cue_sheet(SHEET)
    assert len(sheet.cues) == 3
    assert sheet.current_index == 0
    assert sheet.cues[1].delay_ms == 1000
    assert sheet.cues[2].pedal_mode == "suppress"


def test_speed_out_of_range_names_cue():
    bad = json.dumps([{"name": "Coda", "speed": 9.0}])
    with pytest.raises(CueSheetError, match="speed.*Coda"):
        load_cue_sheet(bad)


def test_duplicate_names_rejected():
    bad = json.dumps([{"name": "A"}, {"name": "A"}])
    with pytest.raises(CueSheetError, match="duplicate"):
        load_cue_sheet(bad)


def test_parse_error_reports_line():
    with pytest.raises(CueSheetError, match="line"):
        load_cue_sheet('[\n{"name": "A"},\n{"name" "B"}\n]')


def test_empty_sheet_rejected():
    with pytest.raises(CueSheetError):
        load_cue_sheet("[]")


def test_preset_apply_and_read_back():
    sheet = load_cue_sheet(SHEET)
    chain = EffectChain()
    sheet.cues[1].apply_to(chain)
    params = chain_params(chain)
    assert params["velocity"] == {"scale": 1.0, "offset": 10}
    assert params["delay_ms"] == 1000
    assert params["pedal_mode"] == "force_on"


def test_set_param_single_field():
    chain = EffectChain()
    before = chain_params(chain)
    set_param(chain, "delay_ms", 1000)
    after = chain_params(chain)
    assert chain.delay_us == ms(1000)
    before.pop("delay_ms"), after.pop("delay_ms")
    assert before == after


def test_set_param_rejection_leaves_chain_identical():
    chain = EffectChain()
    chain.velocity_scale = 1.5
    snapshot = copy.deepcopy(chain)
    for path, value in [("speed", 9.0), ("speed", "fast"), ("delay_ms", -1),
                        ("pedal_mode", "sideways"), ("nope", 1),
                        ("velocity.scale", 100), ("delay_ms", True)]:
        with pytest.raises(CommandError):
            set_param(chain, path, value)
        assert chain == snapshot


def test_goto_out_of_range():
    sheet = load_cue_sheet(SHEET)
    with pytest.raises(CommandError):
        sheet.goto(3)
    assert sheet.current_index == 0


def test_command_wire_round_trip():
    cmds = [SetParam("delay_ms", 1000), LoopPlay(3), Stop(), GotoCue(2),
            NextCue(), PrevCue()]
    for cmd in cmds:
        assert parse_command(command_to_json(cmd)) == cmd


def test_parse_unknown_command():
    with pytest.raises(CommandError):
        parse_command({"cmd": "dance"})


def test_default_sheet():
    sheet = CueSheet.default()
    assert sheet.current().name == "default"
