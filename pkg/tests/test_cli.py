import json

import pytest

from dgbo import cli
from dgbo.plots import emit_plots, plot_comparison
from dgbo.solver import SimConfig


def run_cli(*args):
    return cli.main(list(args))


def test_verify_cutoffs_reports_json(tmp_path, capsys):
    code = run_cli("verify-cutoffs", "--out", str(tmp_path), "--override", "pairs=[[1,5]]",
                   "--override", "samples=2000")
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["pass"] is True and rep["families"][0]["eps"] == 1
    assert "PASS verify-cutoffs" in capsys.readouterr().out


def test_verify_identity_prints_residual(tmp_path, capsys):
    code = run_cli("verify-identity", "--out", str(tmp_path), "--override", "alphas=[0.5]",
                   "--override", "Ns=[1024]")
    assert code == 0
    assert "residual=" in capsys.readouterr().out


def test_run_time_zero(tmp_path):
    out = tmp_path / "r"
    assert run_cli("run", "--out", str(out), "--override", "sim.T=0", "--override", "sim.N=256") == 0
    assert [p.name for p in (out / "snapshots").iterdir()] == ["00000000.bin"]
    assert (out / "diagnostics.csv").exists() and (out / "summary.json").exists()


def test_invalid_config_exit_code(tmp_path, capsys):
    assert run_cli("run", "--out", str(tmp_path), "--override", "diagnostics.b=3") == cli.EXIT_CONFIG
    assert capsys.readouterr().err.startswith("error: config: eps,b:")
    assert run_cli("run", "--out", str(tmp_path), "--override", "sim.alpha=2") == cli.EXIT_CONFIG
    assert run_cli("propagation-demo", "--out", str(tmp_path), "--override", "v=-1") == cli.EXIT_CONFIG
    assert run_cli("run", "--out", str(tmp_path), "--override", "novalue") == cli.EXIT_CONFIG


def test_config_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "schema": 1,\n  "N": \n}')
    assert run_cli("run", "--config", str(bad), "--out", str(tmp_path / "o")) == cli.EXIT_CONFIG
    assert "line 4" in capsys.readouterr().err
    old = tmp_path / "old.json"
    old.write_text('{"schema": 99}')
    assert run_cli("run", "--config", str(old), "--out", str(tmp_path / "o")) == cli.EXIT_CONFIG
    assert run_cli("run", "--config", str(tmp_path / "missing.json")) == cli.EXIT_CONFIG


def test_config_file_with_command_block(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema": 1, "run": {"sim": {"N": 256, "T": 0.05, "dt": 0.01},
                                                    "diagnostics": None}}))
    out = tmp_path / "o"
    assert run_cli("run", "--config", str(cfg), "--out", str(out)) == 0
    assert not (out / "diagnostics.csv").exists()
    echoed = SimConfig.from_dict(json.loads((out / "config.json").read_text()))
    assert echoed == SimConfig(N=256, T=0.05, dt=0.01)


def test_override_parsing():
    block = {"a": {"b": 1}}
    cli.apply_override(block, "a.b=[1, 2]")
    cli.apply_override(block, "a.c=text")
    cli.apply_override(block, "d=0.5")
    assert block == {"a": {"b": [1, 2], "c": "text"}, "d": 0.5}


def test_run_is_deterministic(tmp_path):
    args = ["--override", "sim.N=256", "--override", "sim.T=0.1", "--override", "sim.dt=0.01", "--seed", "4"]
    assert run_cli("run", "--out", str(tmp_path / "a"), *args) == 0
    assert run_cli("run", "--out", str(tmp_path / "b"), *args) == 0
    for name in ("series.csv", "summary.json", "diagnostics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DGBO_OUT", str(tmp_path))
    assert run_cli("verify-identity", "--override", "alphas=[1.0]", "--override", "Ns=[1024]") == 0
    assert (tmp_path / "verify-identity" / "report.json").exists()


def test_blow_up_exit_code(tmp_path, capsys):
    code = run_cli("run", "--out", str(tmp_path), "--override", "sim.N=256", "--override", "sim.dt=0.05",
                   "--override", "sim.T=5", "--override", "sim.safety=1e6",
                   "--override", 'sim.initial={"kind": "gaussian", "A": 200.0}', "--override", "diagnostics=null")
    assert code == cli.EXIT_BLOWUP
    assert "snapshots" in capsys.readouterr().err


def test_commutator_suite_uses_seed(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("verify-commutator-bound", "--out", str(a), "--override", "trials=3", "--seed", "9") == 0
    assert run_cli("verify-commutator-bound", "--out", str(b), "--override", "trials=3", "--seed", "9") == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_emit_plots_missing_inputs(tmp_path):
    with pytest.raises(FileNotFoundError) as info:
        emit_plots(tmp_path)
    assert "series.csv" in str(info.value) and "config.json" in str(info.value)


def test_emit_plots_and_comparison(tmp_path):
    for name in ("one", "two"):
        assert run_cli("run", "--out", str(tmp_path / name), "--override", "sim.N=256",
                       "--override", "sim.T=0.1", "--override", "sim.dt=0.01") == 0
    made = emit_plots(tmp_path / "one")
    assert {p.name for p in made} >= {"waterfall.png", "drift.png", "weighted_energy.png", "decay.png"}
    img = plot_comparison({"one": tmp_path / "one", "two": tmp_path / "two"}, "W_3", tmp_path / "cmp.png")
    assert img.stat().st_size > 0


def test_report_aggregates(tmp_path, capsys):
    assert run_cli("verify-identity", "--out", str(tmp_path / "id"), "--override", "alphas=[0.5]",
                   "--override", "Ns=[1024]") == 0
    assert run_cli("run", "--out", str(tmp_path / "r"), "--override", "sim.N=256", "--override", "sim.T=0.05",
                   "--override", "sim.dt=0.01") == 0
    assert run_cli("report", "--out", str(tmp_path)) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["suites"] == {"id": True}
    assert "r/drift.png" in rep["plots"]


def test_parallel_jobs_match_serial(tmp_path):
    base = ["--override", "pairs=[[1,5],[0.5,3]]", "--override", "samples=1000"]
    assert run_cli("verify-cutoffs", "--out", str(tmp_path / "s"), *base) == 0
    assert run_cli("verify-cutoffs", "--out", str(tmp_path / "p"), "--jobs", "2", *base) == 0
    assert (tmp_path / "s" / "report.json").read_bytes() == (tmp_path / "p" / "report.json").read_bytes()
