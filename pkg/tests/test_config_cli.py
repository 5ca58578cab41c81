import json

import pytest

from levyruin.cli import main
from levyruin.config import config_from_dict, load_config, load_preset, preset_names
from levyruin.errors import ConfigError
from levyruin.levy_model import validate

SMALL = """
[r]
drift = 1.5
sigma2 = 1.0

[p]
drift = -0.1
drift_convention = "compound"

[p.jump]
intensity = 1.0
law = "exponential"
params = { rate = 1.0 }

[run]
n_replicates = 20000
u = [1.0, 2.0]
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def run_cli(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


@pytest.mark.parametrize("name", preset_names())
def test_presets_load_and_validate(name):
    cfg = load_preset(name)
    assert validate(cfg.model) == []
    assert len(cfg.config_hash()) == 16


def test_config_hash_tracks_seed(small):
    a = load_config(small)
    b = load_config(small)
    assert a.config_hash() == b.config_hash()
    b.run["seed"] = 99
    assert a.config_hash() != b.config_hash()


@pytest.mark.parametrize("doc,key", [
    ({"r": {"drift": 1.0, "sigma2": 1.0}, "p": {"drift": -1.0}, "run": {"bogus": 1}}, "run.bogus"),
    ({"r": {"drift": 1.0, "sigma2": 1.0}, "p": {"drift": -1.0}, "run": {"seed": "x"}}, "run.seed"),
    ({"r": {"drift": 1.0, "sigma2": 1.0}, "p": {"drift": -1.0}, "extra": {}}, "extra"),
    ({"r": {"drift": "a", "sigma2": 1.0}, "p": {"drift": -1.0}}, "r.drift"),
])
def test_config_errors_name_the_key(doc, key):
    with pytest.raises(ConfigError) as info:
        config_from_dict(doc)
    assert info.value.key == key


def test_regime_example1(capsys, tmp_path):
    # [reference] Example 1 preset classifies as a power tail with beta = 2
    code, out, _ = run_cli(capsys, "regime", "--preset", "example1_powertail", "--out", str(tmp_path))
    assert code == 0
    doc = json.loads(out)
    assert doc["result"] == {"regime": "PowerTail", "beta": 2.0}
    saved = json.loads((tmp_path / "regime.json").read_text())
    assert saved["meta"]["seed"] == 20240601 and len(saved["meta"]["config_hash"]) == 16


def test_config_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL.replace("n_replicates = 20000", "n_replicates = -3"))
    code, _, err = run_cli(capsys, "ruin", "--config", str(bad), "--out", str(tmp_path))
    assert code == 2
    assert json.loads(err)["key"] == "run.n_replicates"


def test_malformed_toml(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[r\n")
    code, _, err = run_cli(capsys, "regime", "--config", str(bad))
    assert code == 2 and json.loads(err)["error"] == "config"


def test_reduction_on_negative_jumps_is_module_error(capsys, tmp_path):
    cfgfile = tmp_path / "neg.toml"
    cfgfile.write_text("""
[r]
drift = 1.5
sigma2 = 1.0
[p]
drift = 1.1
drift_convention = "compound"
[p.jump]
intensity = 1.0
law = "negated"
params = { base = { law = "exponential", params = { rate = 1.0 } } }
[run]
n_replicates = 1000
method = "paulsen_reduction"
""")
    code, _, err = run_cli(capsys, "ruin", "--config", str(cfgfile), "--out", str(tmp_path))
    assert code == 1
    assert json.loads(err)["type"] == "MethodPreconditionViolated"


def test_seed_override_in_csv_header(capsys, small, tmp_path):
    code, _, _ = run_cli(capsys, "ruin", "--config", str(small), "--seed", "7", "--format", "csv",
                         "--out", str(tmp_path))
    assert code == 0
    head = (tmp_path / "ruin.csv").read_text().splitlines()
    assert head[1] == "# seed=7" and head[0].startswith("# config_hash=")


def test_perpetuity_worker_invariance(capsys, tmp_path):
    # 1024 grid steps per unit interval give 512-replicate blocks: three blocks here
    small = tmp_path / "fine.toml"
    small.write_text(SMALL.replace("n_replicates = 20000", "n_replicates = 1500\nsteps = 1024"))
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(capsys, "perpetuity", "--config", str(small), "--workers", "1", "--format", "csv",
                   "--out", str(a))[0] == 0
    assert run_cli(capsys, "perpetuity", "--config", str(small), "--workers", "2", "--format", "csv",
                   "--out", str(b))[0] == 0
    assert (a / "perpetuity.csv").read_bytes() == (b / "perpetuity.csv").read_bytes()


@pytest.mark.parametrize("cmd", ["cumulant", "simulate", "tailfit", "renewal"])
def test_other_commands(capsys, small, tmp_path, cmd):
    code, out, _ = run_cli(capsys, cmd, "--config", str(small), "--out", str(tmp_path))
    assert code == 0
    doc = json.loads(out)
    assert doc["meta"]["command"] == cmd and doc["files"]


def test_cumulant_without_root(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "cumulant", "--preset", "example1_certain_ruin", "--out", str(tmp_path))
    assert code == 0
    assert json.loads(out)["result"]["beta"] is None


def test_missing_source_is_config_error(capsys):
    code, _, err = run_cli(capsys, "regime")
    assert code == 2 and json.loads(err)["key"] == "--config"
