from __future__ import annotations

import csv

import pytest

from cargo_esc.cli import main
from cargo_esc.config import ConfigError, build_config
from cargo_esc.outputs import OutputFlags, emit_outputs, summarize
from cargo_esc.simulation import LOG_COLUMNS, RunLog, run_scenario


@pytest.fixture(scope="module")
def short_log():
    return run_scenario(build_config("transport_with_esc", None, ["reciprocation.start=1.0"], duration=4.0))


def test_emit_writes_all_files(short_log, tmp_path):
    paths = emit_outputs(short_log, tmp_path / "out")
    names = sorted(p.name for p in paths)
    assert names == ["plot_com_estimation.csv", "plot_transport.csv", "run.csv", "summary.txt"]
    with (tmp_path / "out" / "run.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == LOG_COLUMNS and rows[0][0] == "t_s"
    assert len(rows) == len(short_log) + 1
    mantissas = [v.lstrip("-").split("e")[0].replace(".", "").lstrip("0") for v in rows[5]]
    assert all(len(m) <= 9 for m in mantissas)
    raw = (tmp_path / "out" / "run.csv").read_bytes()
    assert b"\r\n" in raw


def test_summary_contents(short_log, tmp_path):
    emit_outputs(short_log, tmp_path, OutputFlags(run_csv=False, plot_data=False))
    lines = (tmp_path / "summary.txt").read_text().splitlines()
    kv = dict(line.split("=", 1) for line in lines)
    for key in ("termination_cause", "convergence_time", "max_abs_roll", "max_abs_pitch",
                "final_com_est_x", "rms_position_error", "rms_y_error_transport"):
        assert key in kv
    assert kv["termination_cause"] == "completed"
    assert float(kv["max_abs_roll_transport"]) <= float(kv["max_abs_roll"])
    assert summarize(short_log)["samples"] == len(short_log)


def test_empty_log_rejected_before_writing(tmp_path):
    target = tmp_path / "never"
    with pytest.raises(ConfigError):
        emit_outputs(RunLog(), target)
    assert not target.exists()


def test_io_error_names_path(short_log, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError) as info:
        emit_outputs(short_log, blocker / "sub")
    assert str(blocker) in str(info.value)


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["--scenario", "estimate_fixed_payload", "--duration", "1", "--out", str(tmp_path / "a")]) == 0
    assert "termination_cause=completed" in capsys.readouterr().out
    assert main(["--scenario", "estimate_fixed_payload", "--duration", "5", "--out", str(tmp_path / "b"),
                 "--set", "divergence.max_tilt=0.05"]) == 2
    assert main(["--set", "estimator.g2=-1", "--out", str(tmp_path / "c")]) == 1
    assert main(["--config", str(tmp_path / "missing.yaml")]) == 1
    assert not (tmp_path / "c").exists()


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("schema_version: 1\nscenario_id: transport_no_esc\nduration: 1.0\nseed: 3\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o"), "--no-plot-data"]) == 0
    assert (tmp_path / "o" / "run.csv").exists()
    assert not (tmp_path / "o" / "plot_transport.csv").exists()


def test_cli_dump_config(capsys):
    assert main(["--dump-config", "--scenario", "transport_with_esc"]) == 0
    assert "schema_version: 1" in capsys.readouterr().out
