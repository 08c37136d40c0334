import csv
import json
import shutil
import subprocess

import pytest

from fuzzy_l1 import config, mopso, tuning
from fuzzy_l1.cli import main


def test_scenario_case1_writes_trace(tmp_path, capsys):
    assert main(["scenario", "case1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "trace.csv").exists() and (tmp_path / "trace.svg").exists()
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["diverged"] is False and meta["rows"] == 2301
    assert "bounded" in capsys.readouterr().out


def test_validate_missing_a1(tmp_path, capsys):
    d = json.loads(config.bundled_path("trms_base").read_text())
    del d["plant"]["a1"]
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    assert main(["validate", str(p)]) == 1
    assert "plant.a1" in capsys.readouterr().err


@pytest.mark.parametrize("name", [n for n in sorted(p.stem for p in config.data_dir().glob("*.json"))
                                  if n != "best_compromise"])
def test_validate_bundled(name):
    assert main(["validate", str(config.data_dir() / f"{name}.json")]) == 0


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["scenario", "case1", "--bogus"]) == 1
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_file():
    assert main(["validate", "/nonexistent/c.json"]) == 1


def test_simulate_diverged_exit_code(tmp_path):
    d = {"base": str(config.bundled_path("case1")), "divergence_threshold": 0.05}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    assert main(["simulate", str(p), "--out", str(tmp_path / "o"), "--no-plot"]) == 3
    assert json.loads((tmp_path / "o" / "meta.json").read_text())["diverged"] is True
    d["expect_divergence"] = True
    p.write_text(json.dumps(d))
    assert main(["simulate", str(p), "--out", str(tmp_path / "o"), "--no-plot"]) == 0


def test_fig6b_exit_code(tmp_path):
    # exit 0 whether or not the run diverges, because the scenario expects it
    assert main(["scenario", "fig6b", "--out", str(tmp_path), "--no-plot"]) == 0
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["expect_divergence"] is True


def test_runtime_error_exit_code(tmp_path, monkeypatch):
    from fuzzy_l1 import sim

    def boom(*a, **k):
        raise RuntimeError("kaput")

    monkeypatch.setattr(sim, "run_scenario", boom)
    assert main(["scenario", "case1", "--out", str(tmp_path)]) == 2


def test_tune_smoke_and_pareto(tmp_path):
    camp = tmp_path / "camp.json"
    camp.write_text(json.dumps({"scenario": "tuning-ref", "swarm": {"population": 2, "generations": 1}}))
    out = tmp_path / "t"
    assert main(["tune", str(camp), "--out", str(out), "--quiet"]) == 0
    rows = list(csv.DictReader(open(out / "history.csv")))
    assert len(rows) == 2 and rows[0].keys() >= {"generation", "particle", "E", "U", "p32"}
    front = tuning.read_pareto(out / "pareto.csv")
    assert 1 <= len(front) <= 2
    for a in front:
        for b in front:
            assert not mopso.dominates(a[1], b[1])
    best = json.loads((out / "best_compromise.json").read_text())
    assert len(best["vector"]) == 32 and best["seed"] == 0 and best["config_hash"] == config.load_bundled("tuning-ref").hash
    assert (out / "pareto.svg").exists()
    re = tmp_path / "re"
    assert main(["pareto", str(out / "history.csv"), "--out", str(re), "--no-plot"]) == 0
    assert [o for _, o in tuning.read_pareto(re / "pareto.csv")] == [o for _, o in front]


def test_tune_invalid_campaign(tmp_path, capsys):
    camp = tmp_path / "camp.json"
    camp.write_text(json.dumps({"swarm": {"population": 0, "speed": 3}}))
    assert main(["tune", str(camp)]) == 1
    assert "swarm.speed" in capsys.readouterr().err


def test_install_compromise(tmp_path, monkeypatch):
    data = tmp_path / "data"
    shutil.copytree(config.data_dir(), data)
    monkeypatch.setattr(config, "data_dir", lambda: data)
    rec = tmp_path / "bc.json"
    rec.write_text(json.dumps({"vector": [0.125] * 32, "E": 1.0, "U": 2.0}))
    tuning.install_compromise(rec)
    assert json.loads((data / "best_compromise.json").read_text())["vector"] == [0.125] * 32
    assert config.load(data / "case1.json").fuzzy_params.tolist() == [0.125] * 32
    rec.write_text(json.dumps({"vector": [2.0] * 32}))
    with pytest.raises(ValueError):
        tuning.install_compromise(rec)


def test_pareto_rejects_history_without_positions(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("generation,particle,E,U\n0,0,1,2\n")
    assert main(["pareto", str(p)]) == 2


def test_console_script(tmp_path):
    exe = shutil.which("fuzzy-l1")
    if exe is None:
        pytest.skip("console script not installed")
    r = subprocess.run([exe, "validate", str(config.bundled_path("case2"))], capture_output=True, text=True)
    assert r.returncode == 0 and "ok" in r.stdout
