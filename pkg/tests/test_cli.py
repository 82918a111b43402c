import json
from importlib import resources

import pytest

from liiss import config as cfgmod
from liiss.cli import main
from liiss.errors import ConfigError
from liiss.numerics import fmt17

CONFIG_DIR = resources.files("liiss") / "configs"


def bundled(name):
    return str(CONFIG_DIR / f"{name}.json")


def write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_summary(path):
    return json.loads((path / "summary.json").read_text())


# configuration parsing

def test_all_bundled_configs_load_and_name_a_figure():
    names = sorted(p.name for p in CONFIG_DIR.iterdir() if p.name.endswith(".json"))
    assert len(names) >= 10
    for name in names:
        cfg = cfgmod.load(str(CONFIG_DIR / name))
        assert cfg.mirrors_figure, name


def test_unknown_field_position():
    with pytest.raises(ConfigError) as info:
        cfgmod.load_text('{"kind": "ode_closed",\n  "system": {"A": 1,\n    "bogus": 2}}')
    assert (info.value.line, info.value.column) == (3, 5)


def test_malformed_json_position():
    with pytest.raises(ConfigError) as info:
        cfgmod.load_text('{"kind": "pde",\n "system": {,}}')
    assert info.value.line == 2


def test_missing_beta_fields():
    with pytest.raises(ConfigError):
        cfgmod.load_text('{"kind": "beta_table", "system": {"alpha": "s"}}')


def test_bad_kind():
    with pytest.raises(ConfigError):
        cfgmod.load_text('{"kind": "service"}')


def test_bad_sweep():
    with pytest.raises(ConfigError):
        cfgmod.load_text('{"kind": "ode_closed", "sweep": [-1]}')


def test_certificate_only_for_closed_loop():
    with pytest.raises(ConfigError):
        cfgmod.load_text('{"kind": "pde", "certificate": true}')


def test_bad_expression_points_at_key():
    with pytest.raises(ConfigError) as info:
        cfgmod.load_text('{"kind": "ode_closed",\n "system": {"g": "1/(1+"}}')
    assert info.value.line == 2


@pytest.mark.parametrize("spec", ["0:1", "a:1:3", "1:0:3", "0:1:0"])
def test_parse_grid_rejects(spec):
    with pytest.raises(ConfigError):
        cfgmod.parse_grid(spec, "s_grid")


def test_parse_grid():
    assert cfgmod.parse_grid("0:2.5:11", "g") == (0.0, 2.5, 11)


# liiss run

def test_help(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    assert "usage: liiss" in capsys.readouterr().out


def test_missing_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json")]) == 2
    assert "config error" in capsys.readouterr().err


def test_malformed_config_exit_code(tmp_path, capsys):
    assert main(["run", write(tmp_path, '{"kind": "ode_closed",, }')]) == 2
    assert "line 1, column" in capsys.readouterr().err


def test_invalid_system_exit_code(tmp_path):
    assert main(["run", write(tmp_path, '{"kind": "pde", "system": {"dt": -1}}')]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    text = json.dumps({"kind": "ode_closed", "system": {"x0": [1.2, 2.4], "blowup_threshold": 1e300, "T": 1.0}})
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 3
    assert "StepUnderflow" in capsys.readouterr().err


def test_run_fig2a(tmp_path):
    out = tmp_path / "fig2a"
    assert main(["run", bundled("ode_fig2a"), "--out", str(out)]) == 0
    s = read_summary(out)
    assert s["final_norm"] < 1e-3 and s["blow_up_time"] is None and s["violations"] == 0
    for key in ("kind", "final_norm", "sup_norm", "blow_up_time", "violations", "worst_margin", "config_echo"):
        assert key in s
    assert {"trajectory.csv", "norm.svg", "states.svg"} <= {p.name for p in out.iterdir()}


def test_run_no_plots_and_stride(tmp_path):
    text = json.dumps({"kind": "ode_open", "system": {"T": 2.0}, "outputs": {"stride": 5}})
    out = tmp_path / "o"
    assert main(["run", write(tmp_path, text), "--out", str(out), "--no-plots"]) == 0
    assert not list(out.glob("*.svg"))
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[-1].startswith("2,")


def test_run_blow_up(tmp_path):
    out = tmp_path / "fig5"
    assert main(["run", bundled("ode_fig5"), "--out", str(out), "--no-plots"]) == 0
    assert read_summary(out)["blow_up_time"] < 10


def test_run_certificate(tmp_path):
    out = tmp_path / "cert"
    assert main(["run", bundled("ode_certificate"), "--out", str(out)]) == 0
    s = read_summary(out)
    assert s["certificate"]["status"] == "checked" and s["certificate"]["envelope_violations"] == 0
    assert (out / "envelope.csv").exists() and (out / "envelope.svg").exists()


def test_run_certificate_outside_region(tmp_path):
    text = json.dumps({"kind": "ode_closed", "certificate": True, "system": {"T": 2.0}})
    out = tmp_path / "o"
    assert main(["run", write(tmp_path, text), "--out", str(out), "--no-plots"]) == 0
    assert read_summary(out)["certificate"]["status"].startswith("initial state")
    assert not (out / "envelope.csv").exists()


def test_run_pde(tmp_path):
    text = json.dumps({"kind": "pde", "mirrors_figure": "test", "system": {"T": 1.0, "output_times": [0, 1]}})
    out = tmp_path / "p"
    assert main(["run", write(tmp_path, text), "--out", str(out)]) == 0
    s = read_summary(out)
    assert s["kind"] == "pde" and s["violations"] == 0
    assert sorted(p.name for p in (out / "snapshots").iterdir()) == ["snapshot_t0.csv", "snapshot_t1.csv"]
    assert (out / "snapshots.svg").exists()


def test_run_beta_table(tmp_path):
    out = tmp_path / "b"
    assert main(["run", bundled("beta_table"), "--out", str(out)]) == 0
    lines = (out / "beta.csv").read_text().splitlines()
    assert len(lines) == 12 and lines[0].startswith("s,t=0,")


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    text = json.dumps({"kind": "ode_closed", "system": {"T": 5.0}, "sweep": [0, 3]})
    cfg = write(tmp_path, text)
    assert main(["run", cfg, "--out", str(a), "--jobs", "1"]) == 0
    assert main(["run", cfg, "--out", str(b), "--jobs", "2"]) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files and files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_sweep_summary(tmp_path):
    out = tmp_path / "s"
    text = json.dumps({"kind": "ode_closed", "system": {"T": 5.0}, "sweep": [0, 4]})
    assert main(["run", write(tmp_path, text), "--out", str(out), "--jobs", "1", "--no-plots"]) == 0
    s = read_summary(out)
    assert s["amplitudes"] == [0.0, 4.0] and s["run_dirs"] == ["A_0", "A_4"]
    assert s["sup_norm"][0] <= s["sup_norm"][1]
    assert read_summary(out / "A_4")["amplitude"] == 4.0


def test_csv_format(tmp_path):
    out = tmp_path / "f"
    main(["run", bundled("ode_fig2a"), "--out", str(out), "--no-plots"])
    raw = (out / "trajectory.csv").read_bytes()
    assert b"\r" not in raw and b";" not in raw
    row = raw.decode().splitlines()[5].split(",")
    assert len(row) == 5 and all(v == fmt17(float(v)) for v in row)


# liiss beta

def test_beta_command(capsys):
    assert main(["beta", "--alpha", "s^2", "--g", "1", "--s-grid", "0:1:3", "--t-grid", "0:2:3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "s,t=0,t=1,t=2"
    assert [float(v) for v in lines[2].split(",")] == pytest.approx([0.5, 0.5, 1 / 3, 0.25], rel=1e-9)


def test_beta_command_bad_grid(capsys):
    assert main(["beta", "--alpha", "s", "--g", "1", "--s-grid", "0:1", "--t-grid", "0:2:3"]) == 2


# liiss verify

def test_verify_subset_passes(capsys):
    assert main(["verify", "--only", "4,10"]) == 0
    out = capsys.readouterr().out
    assert "criterion  4 PASS" in out and "criterion 10 PASS" in out


def test_verify_corrupted_tolerance_fails(capsys):
    assert main(["verify", "--only", "10", "--override", "c10.R_prime=1e-30"]) == 1
    out = capsys.readouterr().out
    assert "criterion 10 FAIL" in out and "FAILED criteria: 10" in out


def test_verify_repeatable(capsys):
    main(["verify", "--only", "1,4,10"])
    first = capsys.readouterr().out
    main(["verify", "--only", "1,4,10"])
    assert capsys.readouterr().out == first


@pytest.mark.parametrize("args", [["--only", "99"], ["--only", "x"], ["--override", "nope=1"],
                                  ["--override", "c5.final"]])
def test_verify_bad_arguments(args, capsys):
    assert main(["verify", *args]) == 2
