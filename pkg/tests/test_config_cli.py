import json
import os

import pytest

from attractlab import cli
from attractlab import config as cf
from attractlab.errors import ConfigError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT = os.path.join(ROOT, "configs", "default.json")


def write(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_defaults_resolve():
    cfg = cf.resolve({})
    assert cfg["schema"] == "v1"
    assert cfg["pipeline"]["workers"] >= 1
    assert cf.load(DEFAULT)["family"]["family"] == "LIN"


@pytest.mark.parametrize("doc", [
    {"bogus": 1},
    {"pipeline": {"census": {"seedz": 3}}},
    {"pipeline": {"census": {"N": "ten"}}},
    {"pipeline": {"census": {"N": 2.5}}},
    {"schema": "v0"},
    {"output": {"formats": ["gif"]}},
    {"pipeline": {"fingerprint_basis": "other"}},
    {"region": {"variant": "disc"}},
])
def test_strict_rejections(doc):
    with pytest.raises(ConfigError):
        cf.resolve(doc)


def test_overrides_and_opaque():
    cfg = cf.resolve({}, ["pipeline.census.N=12", "family.epsilon=[[0.01, 0.005]]",
                          "output.directory=elsewhere"])
    assert cfg["pipeline"]["census"]["N"] == 12
    assert cfg["family"]["epsilon"] == [[0.01, 0.005]]
    assert cfg["output"]["directory"] == "elsewhere"
    with pytest.raises(ConfigError):
        cf.resolve({}, ["pipeline.census.N"])


def test_missing_config_exit_2_no_artifacts(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["trap", str(tmp_path / "nope.json"), "--out", str(out), "--quiet"]) == 2
    assert not out.exists()


def test_unknown_key_exit_2(tmp_path):
    cfg = write(tmp_path, {"pipeline": {"trap": {"sample": 10}}})
    assert cli.main(["trap", cfg, "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_trap_not_trapping_exit_1(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["trap", DEFAULT, "--set", "family.epsilon=[[0.5, 0]]",
                     "--out", str(out), "--quiet"])
    assert code == 1
    assert "NotTrapping" in (out / "FAILED").read_text()
    assert (out / "resolved_config.json").exists() and (out / "timing.json").exists()


def test_trap_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["trap", DEFAULT, "--out", str(out), "--quiet"]) == 0
        assert not (out / "FAILED").exists()
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir() if p.name != "timing.json")
    assert files == sorted(p.name for p in outs[1].iterdir() if p.name != "timing.json")
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    doc = json.loads((outs[0] / "trap.json").read_text())
    assert set(doc["meta"]) >= {"config_hash", "seed", "version", "command"}


def test_bad_override_inside_run_exit_2(tmp_path):
    assert cli.main(["census", DEFAULT, "--set", "pipeline.census.seeds=0",
                     "--out", str(tmp_path / "o"), "--quiet"]) == 2
