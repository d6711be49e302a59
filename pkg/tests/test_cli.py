import csv
import io
import json

from dualsimplex.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, export_table, main
from dualsimplex.sim.telemetry import TelemetryLog


def run_dir(root):
    (d,) = [p for p in root.iterdir() if p.is_dir()]
    return d


def test_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["run-pendulum", "--weights", str(tmp_path / "nope.bin"), "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["run-rover", "--stall-rich", "bogus", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["validate-zones", "--speed", "9"]) == EXIT_USAGE
    assert main(["bench-ipc", "-n", "0"]) == EXIT_USAGE
    assert main(["export", str(tmp_path / "missing.jsonl")]) == EXIT_USAGE
    assert main(["--version-that-does-not-exist"]) == EXIT_USAGE


def test_corrupt_weights_is_usage_error(tmp_path):
    bad = tmp_path / "w.bin"
    bad.write_bytes(b"DSNW" + b"\0" * 40)
    assert main(["run-rover", "--weights", str(bad), "--duration", "1", "--out", str(tmp_path)]) == EXIT_USAGE


def test_run_pendulum_with_overrides(tmp_path, capsys):
    rc = main(["run-pendulum", "--duration", "2", "--seed", "3", "--disturb", "1.5:0.5", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    err = capsys.readouterr().err
    assert "override: seed=3" in err and "override: duration=2.0" in err
    rep = json.loads((run_dir(tmp_path) / "report.json").read_text())
    assert rep["seed"] == 3 and rep["records"] == 500
    meta = json.loads((run_dir(tmp_path) / "telemetry.jsonl").read_text().splitlines()[0])
    assert any("seed=3" in o for o in meta["meta"]["overrides"])


def test_run_rover_stall_and_fig8_export(tmp_path, capsys):
    assert main(["run-rover", "--duration", "3", "--stall-rich", "1.0:3", "--out", str(tmp_path)]) == EXIT_OK
    assert "3 Control periods" in capsys.readouterr().err
    js = run_dir(tmp_path) / "telemetry.jsonl"
    out = tmp_path / "fig8.csv"
    assert main(["export", str(js), "--preset", "fig8", "--out", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["time", "front_distance", "commanded_v", "actual_v", "applied_v", "zone"]
    assert len(rows) == 31
    assert main(["export", str(js), "--preset", "fig7"]) == EXIT_USAGE  # pendulum preset on a rover log
    assert main(["export", str(js), "--preset", "fig99"]) == EXIT_USAGE
    assert main(["export", str(js), "--columns", "time_s,mode", "--format", "jsonl"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert json.loads(lines[0]).keys() == {"time_s", "mode"}


def test_export_empty_log():
    log = TelemetryLog("rover", ("x",), ("v",))
    assert export_table(log, ["time_s", "mode"], "csv") == "time_s,mode\n"
    assert export_table(log, ["time_s"], "jsonl") == ""


def test_bench_ipc_counts(tmp_path, capsys):
    assert main(["bench-ipc", "-n", "300", "--size", "64", "--bin-width", "5"]) == EXIT_OK
    text = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["bin_upper_us", "count"] and sum(int(r[1]) for r in rows[1:]) == 300
    assert main(["bench-ipc", "-n", "200", "--safe-node", "50", "--out", str(tmp_path)]) == EXIT_OK
    capsys.readouterr()
    for preset, n in (("fig11a", 200), ("fig11b", 50)):
        assert main(["export", str(tmp_path / "bench_samples.jsonl"), "--preset", preset]) == EXIT_OK
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert sum(int(r[1]) for r in rows[1:]) == n


def test_validate_zones_exit_codes(tmp_path, capsys):
    assert main(["validate-zones", "--phases", "3", "--out", str(tmp_path / "a")]) == EXIT_OK
    assert "validation PASSED" in capsys.readouterr().out
    assert main(["validate-zones", "--halve", "--phases", "3", "--out", str(tmp_path / "b")]) == EXIT_VIOLATION
    assert "validation FAILED" in capsys.readouterr().out
    summary = json.loads((tmp_path / "b" / "zones_report.json").read_text())
    assert summary[0]["passed"] is False


def test_validate_roa_coarse(capsys):
    assert main(["validate-roa", "--grid", "0.6", "--perturb", "0.05"]) == EXIT_OK
    assert "false_positive_count=0" in capsys.readouterr().out
    assert main(["validate-roa", "--grid", "0.6", "--perturb", "0.05", "--inflate", "2"]) == EXIT_VIOLATION


def test_estimate_roa_writes_cert(tmp_path):
    out = tmp_path / "cert.txt"
    assert main(["estimate-roa", "--grid", "0.6", "--perturb", "0", "--out", str(out)]) == EXIT_OK
    from dualsimplex.pendulum.roa import EllipsoidCert

    assert EllipsoidCert.load(out).P.shape == (4, 4)
