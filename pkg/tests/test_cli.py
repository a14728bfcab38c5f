"""Config-driven runner: exit codes, outputs and reproducibility."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from ergolab import cli, config
from ergolab.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "seminorm": """
experiment = "seminorm"
level = 2
H = [32, 32]
N = 5000
[system]
kind = "rotation"
alpha = "sqrt2-1"
[observable]
kind = "cos"
""",
    "criterion": """
experiment = "criterion"
a1 = 1
a2 = 2
N = 5000
horizon = 500
deltas = [0.4, 0.2]
system = { kind = "bernoulli" }
f1 = { kind = "symbol" }
f2 = { kind = "symbol" }
""",
    "rtt": """
experiment = "rtt"
N = 4000
[weight]
a1 = 1
a2 = 2
N = 4000
horizon = 400
deltas = [0.4]
system = { kind = "bernoulli" }
f1 = { kind = "symbol" }
f2 = { kind = "symbol" }
[[targets]]
name = "rot"
system = { kind = "rotation", alpha = "golden" }
g = { kind = "cos" }
samples = 3
[[targets]]
name = "cyc"
system = { kind = "cyclic", q = 3 }
g = { kind = "table", values = [1.0, -0.5, -0.5] }
samples = 2
""",
    "vdc": """
experiment = "vdc"
N = 300
H = 20
trials = 5
""",
    "extension": """
experiment = "extension"
a1 = 1
a2 = 2
N = 2000
samples = 5
system = { kind = "bernoulli" }
f1 = { kind = "symbol" }
f2 = { kind = "symbol" }
""",
    "generic": """
experiment = "generic"
a1 = 1
a2 = 2
N = 5000
mc = 500
points = 3
system = { kind = "rotation", alpha = "sqrt2-1" }
g1 = { kind = "cos", k = 2 }
g2 = { kind = "cos", k = -1 }
""",
}


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _numeric_outputs(out):
    return {p.name: p.read_bytes() for p in sorted(Path(out).iterdir()) if p.name != "manifest.json"}


@pytest.mark.parametrize("experiment", list(SMALL))
def test_every_experiment_runs(tmp_path, experiment):
    cfg = _write(tmp_path, SMALL[experiment])
    out = tmp_path / "out"
    assert cli.main([experiment, "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["seed"] == 3
    assert {"config_hash", "version", "start", "end", "outputs"} <= set(man)
    assert set(man["outputs"]) == set(_numeric_outputs(out))
    for name in man["outputs"]:
        text = (out / name).read_text()
        if name.endswith(".csv"):
            header = text.splitlines()[0]
            assert header and not header[0].isdigit()
        else:
            json.loads(text)


def test_seminorm_writes_one_estimate(tmp_path):
    out = tmp_path / "o"
    cli.main(["seminorm", "--config", str(_write(tmp_path, SMALL["seminorm"])), "--out", str(out)])
    assert sorted(_numeric_outputs(out)) == ["seminorm.json"]
    rec = json.loads((out / "seminorm.json").read_text())
    assert {"level", "c", "value", "stderr", "params"} <= set(rec)


def test_misspelled_key(tmp_path, capsys):
    text = SMALL["seminorm"].replace("[system]", "[systme]")
    code = cli.main(["seminorm", "--config", str(_write(tmp_path, text)), "--out", str(tmp_path)])
    assert code == 1
    assert "systme" in capsys.readouterr().err


def test_misspelled_nested_key(tmp_path, capsys):
    text = SMALL["rtt"].replace('samples = 3', 'sampels = 3')
    assert cli.main(["rtt", "--config", str(_write(tmp_path, text)), "--out", str(tmp_path)]) == 1
    assert "sampels" in capsys.readouterr().err


def test_misspelled_observable_key(tmp_path, capsys):
    text = SMALL["seminorm"].replace('kind = "cos"', 'kind = "cos"\nkk = 2')
    assert cli.main(["seminorm", "--config", str(_write(tmp_path, text)), "--out", str(tmp_path)]) == 1
    assert "kk" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["vdc", "--config", str(tmp_path / "nope.toml")]) == 1


def test_wrong_experiment(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL["vdc"])
    assert cli.main(["criterion", "--config", str(cfg), "--out", str(tmp_path)]) == 1


def test_cost_cap_refusal(tmp_path, capsys):
    text = SMALL["vdc"].replace("N = 300", "N = 2000000")
    cfg = _write(tmp_path, text)
    assert cli.main(["vdc", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "--force" in capsys.readouterr().err


def test_seminorm_cost_cap_and_force(tmp_path):
    text = SMALL["seminorm"].replace("level = 2\nH = [32, 32]", "level = 3\nH = [300, 2, 2]")
    text = text.replace("N = 5000", "N = 500")
    cfg = _write(tmp_path, text)
    assert cli.main(["seminorm", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 1
    assert cli.main(["seminorm", "--config", str(cfg), "--out", str(tmp_path / "b"), "--force"]) == 0


def test_invariant_violation_exit_code(tmp_path, monkeypatch):
    from ergolab.errors import InvariantViolation

    def broken(*a, **k):
        raise InvariantViolation("synthetic")

    monkeypatch.setitem(cli.RUNNERS, "vdc", broken)
    out = tmp_path / "o"
    assert cli.main(["vdc", "--config", str(_write(tmp_path, SMALL["vdc"])), "--out", str(out)]) == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and "synthetic" in man["error"]


@pytest.mark.parametrize("experiment", ["seminorm", "rtt", "generic", "extension"])
def test_same_seed_byte_identical(tmp_path, experiment, monkeypatch):
    cfg = _write(tmp_path, SMALL[experiment])
    runs = []
    for k, threads in enumerate(("1", "3")):
        monkeypatch.setenv("ERGOLAB_THREADS", threads)
        out = tmp_path / f"o{k}"
        assert cli.main([experiment, "--config", str(cfg), "--out", str(out), "--seed", "99"]) == 0
        runs.append(_numeric_outputs(out))
    assert runs[0] == runs[1]
    m = [json.loads((tmp_path / f"o{k}" / "manifest.json").read_text()) for k in (0, 1)]
    assert m[0]["config_hash"] == m[1]["config_hash"]


def test_seed_changes_output(tmp_path):
    cfg = _write(tmp_path, SMALL["extension"])
    for s in ("1", "2"):
        cli.main(["extension", "--config", str(cfg), "--out", str(tmp_path / s), "--seed", s])
    assert _numeric_outputs(tmp_path / "1") != _numeric_outputs(tmp_path / "2")


def test_shipped_configs_validate():
    for path in sorted(CONFIGS.glob("*.toml")):
        cfg = config.load(path)
        config.validate(cfg, cfg["experiment"])
        config.check_caps(cfg, cfg["experiment"])


def test_validate_rejects_unknown_experiment():
    with pytest.raises(ConfigurationError):
        config.validate({}, "teleport")


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, SMALL["vdc"])
    res = subprocess.run([sys.executable, "-m", "ergolab", "vdc", "--config", str(cfg),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "manifest.json" in res.stdout
