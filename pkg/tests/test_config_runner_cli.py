import json
from pathlib import Path

import numpy as np
import pytest

from blochgreen import cli, exact, runner
from blochgreen.config import load_config, parse_config
from blochgreen.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
[experiment]
fixture = advection-diffusion
tasks = evans, resolvent
output = out
"""


def test_config_defaults_and_relative_output(tmp_path):
    cfg = parse_config(SMALL, base_dir=tmp_path)
    assert cfg.get("numerics", "K") == 16
    assert cfg.tasks == ("evans", "resolvent")
    assert cfg.output == tmp_path / "out"


@pytest.mark.parametrize("text, match", [
    ("[numerics]\nK = 4\n", "K ≥ 8"),
    ("[numerics]\nsmoothing = 2\n", "numerics.smoothing"),
    ("[experiment]\ntasks = evans, fly\n", "experiment.tasks"),
    ("[experiment]\nfixture = sine\n", "experiment.fixture"),
    ("[numerics]\nn_xi = 33\n", "numerics.n_xi"),
    ("[heat]\nq = 3\n", "heat.q"),
])
def test_config_rejects(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text, output="out")


def test_output_override_is_cwd_relative(tmp_path):
    cfg_file = tmp_path / "sub" / "c.cfg"
    cfg_file.parent.mkdir()
    cfg_file.write_text(SMALL)
    assert load_config(cfg_file).output == tmp_path / "sub" / "out"
    assert load_config(cfg_file, output="elsewhere").output == Path("elsewhere")


def test_config_needs_output():
    with pytest.raises(ConfigError, match="output"):
        parse_config("[numerics]\nK = 16\n")


def test_json_floats_round_trip():
    vals = [0.1, 1 / 3, np.pi * 1e-300, -2.5e17]
    text = runner.to_json({"v": vals, "b": True, "n": None})
    back = json.loads(text)
    assert back["v"] == vals and back["b"] is True and back["n"] is None


def _run(cfg_path, out):
    cfg = load_config(cfg_path, output=str(out))
    return runner.run(cfg)


def test_oracle_run_deterministic_and_manifest(tmp_path):
    status, summary = _run(CONFIGS / "oracle.cfg", tmp_path / "a")
    assert status == 0 and summary["all_pass"]
    _run(CONFIGS / "oracle.cfg", tmp_path / "b")
    a, b = tmp_path / "a", tmp_path / "b"
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n
    manifest = json.loads((a / "manifest.json").read_text())
    listed = {f["name"] for f in manifest["files"]}
    assert listed == set(names) - {"manifest.json"}
    assert all(runner.sha256(a / f["name"]) == f["sha256"] for f in manifest["files"])

    assert cli.main(["report", str(a)]) == 0
    (a / "summary.json").write_text((a / "summary.json").read_text() + " ")
    assert cli.main(["report", str(a)]) == 2


def test_nonempty_output_refused(tmp_path):
    out = tmp_path / "busy"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    with pytest.raises(runner.RunError, match="not empty"):
        _run(CONFIGS / "oracle.cfg", out)
    assert (out / "keep.txt").exists()


def test_failure_removes_partial_outputs(tmp_path):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("[experiment]\nfixture = file:missing.prof\ntasks = evans\n")
    out = tmp_path / "run"
    with pytest.raises(runner.RunError) as err:
        _run(cfg_file, out)
    assert err.value.module == "profiles"
    assert not out.exists()


def test_task_failure_names_module(tmp_path, monkeypatch):
    def boom(profile, cfg):
        raise RuntimeError("no luck")
    mod, op, _ = runner.TASK_FUNCS["resolvent"]
    monkeypatch.setitem(runner.TASK_FUNCS, "resolvent", (mod, op, boom))
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text(SMALL)
    with pytest.raises(runner.RunError, match=f"{mod}.{op}"):
        _run(cfg_file, tmp_path / "out")
    assert not (tmp_path / "out").exists()


def test_cli_profile_make_show(tmp_path, capsys):
    f = tmp_path / "m.prof"
    assert cli.main(["profile", "make", "--fixture", "manufactured", "--out", str(f)]) == 0
    capsys.readouterr()
    assert cli.main(["profile", "show", str(f)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n"] == 1 and info["manufactured_residual"] < 1e-8


def test_cli_evans(capsys):
    # heat: D(lambda, 0) = (e^{mu} - 1)(e^{-mu} - 1) with mu = sqrt(lambda)
    assert cli.main(["evans", "--fixture", "heat", "--lam", "1"]) == 0
    out = capsys.readouterr().out.split()
    assert abs(float(out[2]) - (np.e - 1) * (np.exp(-1) - 1)) < 1e-9
    assert cli.main(["evans", "--fixture", "heat", "--lam", "-0.1", "--xi", "0.3",
                     "--root"]) == 0
    root = capsys.readouterr().out.split()
    assert abs(float(root[1]) + 0.09) < 1e-9
    assert cli.main(["evans", "--fixture", "heat", "--lam", "-0.09", "--xi", "0.3",
                     "--radius", "0.05"]) == 0
    assert capsys.readouterr().out.strip() == "winding number 1"


def test_cli_spectrum(capsys):
    assert cli.main(["spectrum", "--fixture", "heat", "--xi", "0.4", "--count", "1"]) == 0
    assert abs(complex(capsys.readouterr().out.replace(" ", "").replace("i", "j")) + 0.16) < 1e-12
    assert cli.main(["spectrum", "--fixture", "manufactured", "--stability"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["D1"] and rep["D2"] and "branch" in rep


def test_cli_resolvent_and_green(tmp_path):
    f = tmp_path / "r.csv"
    assert cli.main(["resolvent", "--fixture", "heat", "--lam", "1", "--points", "4",
                     "--out", str(f)]) == 0
    rows = np.loadtxt(f, delimiter=",", skiprows=1)
    # whole-line heat resolvent kernel -e^{-|x - y|} / 2
    assert np.max(np.abs(rows[:, 2] + 0.5 * np.exp(-np.abs(rows[:, 0] - rows[:, 1])))) < 1e-9
    g = tmp_path / "g.csv"
    assert cli.main(["green", "--fixture", "heat", "--t", "1", "--nx", "21", "--cells", "32",
                     "--out", str(g)]) == 0
    rows = np.loadtxt(g, delimiter=",", skiprows=1)
    assert np.max(np.abs(rows[:, 1] - exact.heat_kernel(rows[:, 0], 1.0))) < 1e-10


def test_cli_errors_exit_2(tmp_path, capsys):
    assert cli.main(["profile", "show", str(tmp_path / "nothing.prof")]) == 2
    assert "error" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("[numerics]\nK = 4\n")
    assert cli.main(["run", str(bad), "--output", str(tmp_path / "o")]) == 2
