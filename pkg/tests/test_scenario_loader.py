import json

import pytest

from utils.exceptions import ConfigurationError
from utils.scenario_loader import available_scenarios, get_default_scenario, load_scenario


def test_bundled_scenarios_load():
    assert {"intersection", "merging", "overtaking", "toy"} <= set(available_scenarios())
    for name in ("intersection", "merging", "overtaking", "toy"):
        cfg = get_default_scenario(name)
        assert cfg.kind == name
        assert cfg.agents[cfg.ego_index].name == cfg.ego


def test_unknown_scenario_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        get_default_scenario("rotatoria")


def test_missing_file_is_a_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError):
        load_scenario(tmp_path / "nada.json")


def test_malformed_json_is_a_configuration_error(tmp_path):
    path = tmp_path / "quebrado.json"
    path.write_text("{ nao e json", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_scenario(path)


def test_validation_error_carries_field_path(tmp_path):
    raw = json.loads(get_default_scenario("toy").model_dump_json())
    raw["collision"]["d_safe"] = -1.0
    path = tmp_path / "invalido.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    with pytest.raises(ConfigurationError) as info:
        load_scenario(path)
    assert info.value.field_path == "collision.d_safe"


def test_mixture_weights_must_sum_to_one(tmp_path):
    raw = json.loads(get_default_scenario("toy").model_dump_json())
    raw["agents"][1]["intent"]["weights"] = [0.5, 0.6]
    path = tmp_path / "mistura.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    with pytest.raises(ConfigurationError) as info:
        load_scenario(path)
    assert info.value.field_path.startswith("agents.1.intent")
