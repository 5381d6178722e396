import json

import pytest

from catos.config import ConfigError, config_from_dict, load_config

MINIMAL = {"seed": 1, "duration_ms": 60000, "output_dir": "out"}


def test_minimal_config_fills_defaults():
    cfg = config_from_dict(dict(MINIMAL))
    assert cfg.seed == 1
    assert cfg.cameras[0].fps == 7.5
    assert cfg.vision.pre_roll_ms == 2000
    assert cfg.rig.p_dispense == 0.8
    assert cfg.schema.stimulus_to_button == {0: 0, 1: 1, 2: 2}


def test_seed_is_required():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"duration_ms": 1000, "output_dir": "x"})
    assert any("seed" in e for e in err.value.errors)


def test_unknown_keys_all_reported():
    bad = dict(MINIMAL)
    bad["typo_top"] = 1
    bad["vision"] = {"diff_threshold": 30, "typo_vision": 2}
    bad["rig"] = {"typo_rig": 3}
    with pytest.raises(ConfigError) as err:
        config_from_dict(bad)
    joined = "\n".join(err.value.errors)
    assert "typo_top" in joined
    assert "typo_vision" in joined
    assert "typo_rig" in joined


def test_bad_mapping_rejected():
    bad = dict(MINIMAL)
    bad["schema"] = {"stimulus_to_button": {"0": 0, "1": 0, "2": 2}}
    with pytest.raises(ConfigError) as err:
        config_from_dict(bad)
    assert any("bijection" in e for e in err.value.errors)


def test_zone_outside_frame_rejected():
    bad = dict(MINIMAL)
    bad["schema"] = {"trigger_zone": [10, 10, 200, 200]}
    with pytest.raises(ConfigError) as err:
        config_from_dict(bad)
    assert any("trigger_zone" in e for e in err.value.errors)


def test_duplicate_camera_ids_rejected():
    bad = dict(MINIMAL)
    bad["cameras"] = [{"camera_id": 0}, {"camera_id": 0}]
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_bad_session_id_rejected():
    bad = dict(MINIMAL)
    bad["session_id"] = "jan-1st"
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_custom_stimuli_parsed():
    cfg_dict = dict(MINIMAL)
    cfg_dict["audio"] = {"stimuli": [
        {"stimulus_id": 0, "tone_hz": 500.0, "duration_ms": 400},
        {"stimulus_id": 1, "tone_hz": 750.0, "duration_ms": 400},
        {"stimulus_id": 2, "tone_hz": 1000.0, "duration_ms": 400},
    ]}
    cfg = config_from_dict(cfg_dict)
    assert [s.tone_hz for s in cfg.stimuli] == [500.0, 750.0, 1000.0]


def test_load_config_rejects_invalid_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(dict(MINIMAL)))
    cfg = load_config(path)
    assert cfg.duration_ms == 60000
