import json
import shutil
from pathlib import Path

import pytest

from varexp_sde.cli import COMMANDS, run
from varexp_sde.config import SCHEMA, load_config
from varexp_sde.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]
REMARK1_CFG = ROOT / "configs" / "remark1.cfg"
GBM_CFG = ROOT / "configs" / "gbm.cfg"

# small but multi-chunk settings so the thread pool is actually exercised
FAST = ["run.n_paths=4100", "run.n_steps=40", "picard.n_paths=300",
        "picard.n_steps_per_interval=10", "asymptotic.n_paths=2100", "asymptotic.n_steps=200",
        "asymptotic.T_long=10", "stability.n_paths=2100", "poisson.n_paths=4200",
        "poisson.dt=1e-3", "poisson.n_grid=256", "moments.n_checkpoints=4"]


def test_defaults_cover_schema():
    cfg = load_config("")
    for section, keys in SCHEMA.items():
        assert set(cfg[section]) == set(keys)
    assert cfg.n_paths("picard") == cfg["run"]["n_paths"]


def test_unknown_key_has_line():
    with pytest.raises(ConfigError, match=r"model\.bogus \(line 3\)"):
        load_config("[model]\nx0 = 1\nbogus = 2\n")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config("[nope]\n")


def test_bad_value_and_override():
    with pytest.raises(ConfigError, match="run.seed"):
        load_config("[run]\nseed = abc\n")
    cfg = load_config("[run]\nseed = 1\n", ["run.seed=7", "model.x0=2.5"])
    assert cfg["run"]["seed"] == 7 and cfg["model"]["x0"] == 2.5
    with pytest.raises(ConfigError):
        load_config("", ["seed=7"])
    with pytest.raises(ConfigError):
        load_config("", ["run.nope=1"])


def test_schema_version():
    with pytest.raises(ConfigError, match="schema"):
        load_config("[meta]\nschema = 2\n")


def test_resolved_roundtrip():
    cfg = load_config(REMARK1_CFG.read_text())
    again = load_config(cfg.resolved_text())
    assert again.sha256() == cfg.sha256()
    assert again.values == cfg.values


def _artifacts(d: Path) -> dict[str, bytes]:
    out = {}
    for f in sorted(d.iterdir()):
        data = f.read_bytes()
        if f.name == "manifest.txt":
            data = b"\n".join(l for l in data.splitlines() if not l.startswith(b"# wall_time_s"))
        out[f.name] = data
    return out


@pytest.mark.parametrize("command", COMMANDS)
def test_determinism_across_threads(tmp_path, command):
    # same config (output directory included) every time; snapshot between runs
    d = tmp_path / "out"
    dirs = []
    for threads in (1, 1, 8):
        if d.exists():
            shutil.rmtree(d)
        argv = [command, "--config", str(REMARK1_CFG), "--output-dir", str(d),
                "--threads", str(threads)]
        for s in FAST:
            argv += ["--set", s]
        code = run(argv)
        assert code in (0, 1)
        dirs.append(_artifacts(d))
    assert dirs[0] == dirs[1] == dirs[2]
    assert "manifest.txt" in dirs[0] and len(dirs[0]) >= 2


def test_manifest_reloads(tmp_path):
    d = tmp_path / "a"
    assert run(["feller", "--config", str(REMARK1_CFG), "--output-dir", str(d)]) == 0
    text = (d / "manifest.txt").read_text()
    assert "# subcommand: feller" in text and "# config_sha256: " in text
    d2 = tmp_path / "b"
    assert run(["feller", "--config", str(d / "manifest.txt"), "--output-dir", str(d2)]) == 0
    assert (d / "feller.json").read_bytes() == (d2 / "feller.json").read_bytes()


def test_exit_codes(tmp_path, capsys):
    out = ["--output-dir", str(tmp_path)]
    assert run(["simulate", "--config", str(REMARK1_CFG), "--scheme", "gbm_exact"] + out) == 2
    assert run(["feller", "--set", "model.bogus=1"] + out) == 2
    assert run(["feller", "--set", "model.p=constant:2"] + out) == 2
    assert run(["feller", "--config", str(tmp_path / "missing.cfg")] + out) == 2
    # a start so large that the drift blows the state past the overflow ceiling
    assert run(["simulate", "--set", "model.x0=1e200", "--set", "model.mu=const:1e120",
                "--set", "run.n_paths=2", "--set", "run.n_steps=2"] + out) == 3
    assert "overflow" in capsys.readouterr().err


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("VARSDE_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(["validate-exponent", "--set", "validate.exponents=remark1,constant:2"]) == 1
    data = json.loads((tmp_path / "env" / "validate.json").read_text())
    assert data["pass"] is False


def test_gbm_simulate_outputs(tmp_path):
    code = run(["simulate", "--config", str(GBM_CFG), "--output-dir", str(tmp_path),
                "--n-paths", "500", "--set", "run.n_steps=50", "--scheme", "gbm_exact"])
    assert code == 0
    names = {p.name for p in tmp_path.iterdir()}
    assert "manifest.txt" in names and any(n.endswith(".csv") for n in names)
