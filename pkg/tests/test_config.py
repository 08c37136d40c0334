import json

import numpy as np
import pytest

from fuzzy_l1 import config
from fuzzy_l1.plant import PlantParams, decompose


def bundled():
    return sorted(p.stem for p in config.data_dir().glob("*.json") if p.stem not in ("trms_base", "best_compromise"))


def _raw(name="case1"):
    return config.load_raw(config.bundled_path(name))


@pytest.mark.parametrize("name", bundled())
def test_bundled_configs_validate(name):
    sc = config.load_bundled(name)
    assert sc.name == name
    assert sc.controller.P_ref.shape == (6, 6)


def test_named_scenarios_present():
    assert set(config.SCENARIOS) <= set(bundled())


def test_missing_a1_names_path():
    d = _raw()
    del d["plant"]["a1"]
    with pytest.raises(config.ConfigError) as info:
        config.build(d)
    assert ("plant.a1", "required number") in info.value.errors


def test_errors_are_collected():
    d = _raw()
    d["plant"]["a3"] = "big"
    d["reference"] = {"both": [{"type": "triangle"}]}
    d["divergence_threshold"] = -1
    with pytest.raises(config.ConfigError) as info:
        config.build(d)
    paths = {p for p, _ in info.value.errors}
    assert {"plant.a3", "reference.channels[0][0].type", "divergence_threshold"} <= paths


def test_reference_model_consistency_checked():
    d = _raw()
    d["controller"]["A_m"][0][0] += 1e-3
    with pytest.raises(config.ConfigError) as info:
        config.build(d)
    assert info.value.errors[0][0] == "controller.A_m"


def test_non_hurwitz_reference_rejected():
    d = _raw()
    A = decompose(PlantParams.from_dict(d["plant"])).A
    d["controller"]["A_m"] = A.tolist()
    d["controller"]["baseline_gain"] = np.zeros((2, 6)).tolist()
    with pytest.raises(config.ConfigError) as info:
        config.build(d)
    assert info.value.errors[0][0] == "controller"


def test_bundled_reference_model():
    sc = config.load_bundled("case1")
    m = decompose(sc.plant)
    assert np.allclose(sc.controller.A_m, m.A - m.B_m @ sc.controller.baseline_gain, atol=1e-9)
    poles = np.sort_complex(np.linalg.eigvals(sc.controller.A_m))
    expect = np.sort_complex(np.array([-20 + 0.3j, -20 - 0.3j, -25 + 0.5j, -25 - 0.5j, -27 + 0.5j, -27 - 0.5j]))
    assert np.allclose(poles, expect, atol=1e-6)


def test_fuzzy_params_validation(tmp_path):
    d = _raw()
    d["filter"]["params"] = [0.5] * 31
    d["filter"].pop("params_file", None)
    with pytest.raises(config.ConfigError, match="filter.params"):
        config.build(d)
    d["filter"]["params"] = [1.5] * 32
    with pytest.raises(config.ConfigError, match="filter.params"):
        config.build(d)
    d["filter"] = {"mode": "fuzzy"}
    with pytest.raises(config.ConfigError, match="needs"):
        config.build(d)
    d["filter"] = {"mode": "sometimes"}
    with pytest.raises(config.ConfigError, match="filter.mode"):
        config.build(d)


def test_base_chain_and_relative_params(tmp_path):
    (tmp_path / "vec.json").write_text(json.dumps({"vector": [0.25] * 32}))
    (tmp_path / "s.json").write_text(json.dumps({
        "base": "case1.json", "name": "mine",
        "filter": {"mode": "fuzzy", "params_file": "vec.json"},
    }))
    sc = config.load(tmp_path / "s.json")
    assert sc.name == "mine" and np.all(sc.fuzzy_params == 0.25)


def test_invalid_json(tmp_path):
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(config.ConfigError):
        config.load(tmp_path / "bad.json")


def test_unknown_bundled():
    with pytest.raises(config.ConfigError):
        config.bundled_path("case9")


def test_hash_ignores_private_keys():
    d = _raw()
    h = config.config_hash(d)
    d["_dir"] = "/elsewhere"
    assert config.config_hash(d) == h
    d["seed"] = 5
    assert config.config_hash(d) != h


def test_reference_terms():
    ref = config.Reference([[{"type": "sine", "amplitude": 2.0, "frequency": 1.0, "phase": 0.5}],
                            [{"type": "step", "amplitude": 0.3, "time": 5.0}, {"type": "constant", "value": 1.0}]])
    assert np.allclose(ref(1.0), [2 * np.sin(1.5), 1.0])
    assert np.allclose(ref(5.0), [2 * np.sin(5.5), 1.3])
    g = ref.grid(0.5, 4)
    assert g.shape == (5, 2) and np.allclose(g[2], ref(1.0))


def test_case_references():
    c1 = config.load_bundled("case1").reference
    assert np.allclose(c1(4.99), 0.45 * np.sin(0.2 * 4.99))
    assert np.allclose(c1(5.0), 0.3 + 0.45 * np.sin(1.0))
    t = config.load_bundled("tuning-ref").reference
    assert np.allclose(t(2.0), np.cos(1.0))
    assert config.load_bundled("case2").uncertainty.mode == "case2"
