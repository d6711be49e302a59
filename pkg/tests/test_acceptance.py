"""Acceptance criteria 1-10; the terminal summary prints one PASS/FAIL line per criterion."""

import csv
import io
import json
import math
import re
import subprocess
import sys
import time

import numpy as np
import pytest

from dualsimplex.cli import main
from dualsimplex.neural.envs import PendulumEnv
from dualsimplex.neural.mlp import PENDULUM_SPEC, Policy, param_count
from dualsimplex.neural.train import DESK_PENDULUM, handover_set, train_pendulum
from dualsimplex.neural.weights import WeightFileError, save_weights
from dualsimplex.pendulum.roa import RoaOptions, ScalarCubicLoop, estimate_level
from dualsimplex.pendulum.runtime import DATA
from dualsimplex.report import check_mode_soundness
from dualsimplex.runner import run_scenario
from dualsimplex.sim.scenario import load_scenario
from test_cab import model_check

SCEN = DATA / "scenarios"
SCENARIOS = sorted(p.stem for p in SCEN.glob("*.yaml"))


@pytest.mark.criterion(1)
def test_c1_roa_soundness(capsys):
    """ROA cert: 0 false positives at grid 0.05 +-5 %, cubic oracle radius within 5 %"""
    t0 = time.perf_counter()
    rc = main(["validate-roa", "--grid", "0.05", "--perturb", "0.05"])
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    stats = dict(re.findall(r"(\w+)=(\d+)", out))
    print(out.strip(), f"elapsed={elapsed:.0f}s")
    assert int(stats["boundary_points"]) >= 2000 and int(stats["parameter_sets"]) > 1
    assert int(stats["false_positive_count"]) == 0 and rc == 0
    assert elapsed <= 600
    P0, level = estimate_level(ScalarCubicLoop(), RoaOptions(grid=0.05, robust_perturb=0, t_max=20, dt=0.01))
    assert abs(math.sqrt(level / P0[0, 0]) - 1.0) <= 0.05


@pytest.mark.criterion(2)
def test_c2_simplex_switching():
    """push: HP->Safe within one 2 ms monitor period of the index crossing; hysteresis; soundness"""
    log = run_scenario(load_scenario(SCEN / "pendulum_push.yaml"))
    push = log.events[0]["time_s"]
    crossing = next(t for t, idx, _, _ in log.monitor if t >= push and idx >= 1.0)
    down = next(s for s in log.transitions if s["from"] == "HighPerformance" and s["time_s"] >= push)
    assert down["to"] == "SafeRecover"
    assert 0 <= down["time_s"] - crossing <= 0.002 + 1e-12
    ups = [s for s in log.transitions if s["to"] == "HighPerformance"]
    assert ups and all(s["index"] < 0.1 for s in ups)
    assert check_mode_soundness(log) == []


@pytest.mark.criterion(3)
def test_c3_deadline_fallback():
    """3-period rich stall: logged stale switch, every tick has an applied actuation"""
    sc = load_scenario(SCEN / "pendulum_stall.yaml")
    assert sc.events.events[0].args["duration"] == pytest.approx(3 * 0.004)
    log = run_scenario(sc)
    assert any(s["cause"] == "stale" and s["to"] == "SafeRecover" for s in log.transitions)
    assert len(log.records) == 2000
    assert all(r.applied_output is not None and all(map(math.isfinite, r.applied_output)) for r in log.records)


@pytest.mark.criterion(4)
def test_c4_pendulum_training():
    """desk CMA-ES (16/60, pinned seed): >= 90 % of 20 fresh disturbed episodes reach 1000 steps"""
    t0 = time.perf_counter()
    res = train_pendulum(DESK_PENDULUM)
    assert time.perf_counter() - t0 <= 900
    rows = list(csv.reader(io.StringIO(res.history_csv())))[1:]
    assert len(rows) == DESK_PENDULUM.generations
    assert all(float(b) >= float(m) >= float(w) for _, b, m, w in rows)
    env = PendulumEnv(init_P=handover_set())
    assert env.push_rate > 0
    pol = Policy(PENDULUM_SPEC, res.weights)
    full = sum(env.episode(pol, 10_000 + k).steps == 1000 for k in range(20))
    print(f"horizon reached in {full}/20 evaluation episodes")
    assert full >= 18


@pytest.mark.criterion(5)
def test_c5_zone_validation(tmp_path, capsys):
    """zones at 3 m/s: shipped thresholds stop with clearance > 0; halved thresholds FAIL"""
    assert main(["validate-zones", "--speed", "3", "--out", str(tmp_path / "ok")]) == 0
    ok = json.loads((tmp_path / "ok" / "zones_report.json").read_text())[0]
    assert ok["passed"] and ok["final_clearance"] > 0 and ok["collisions"] == 0
    assert main(["validate-zones", "--speed", "3", "--halve", "--out", str(tmp_path / "half")]) == 1
    assert "FAILED" in capsys.readouterr().out
    assert not json.loads((tmp_path / "half" / "zones_report.json").read_text())[0]["passed"]


@pytest.mark.criterion(6)
def test_c6_sudden_obstacle():
    """obstacle in Z3: latched stop within one 100 ms period, (0,0) applied until the ack"""
    log = run_scenario(load_scenario(SCEN / "rover_obstacle.yaml"))
    spawn = next(e["time_s"] for e in log.events if e["type"] == "spawn_obstacle")
    ack = next(e["time_s"] for e in log.events if e["type"] == "operator_ack")
    stop = next(r.time for r in log.records if r.mode == "SafetyStop")
    assert 0 <= stop - spawn <= 0.1
    held = [r for r in log.records if stop <= r.time < ack]
    assert held and all(r.mode == "SafetyStop" and r.applied_output == [0.0, 0.0] for r in held)
    assert log.meta["collisions"] == 0


@pytest.mark.criterion(7)
def test_c7_attack_run():
    """eta = 2 on the pinned course: goal, no collisions, no stops, a capped Z1/Z2 interval"""
    log = run_scenario(load_scenario(SCEN / "rover_attack.yaml"))
    assert log.meta["goal_reached"] and log.meta["collisions"] == 0
    assert not any(r.mode == "SafetyStop" for r in log.records)
    capped = [r for r in log.records if r.index_or_zone in ("Z1", "Z2") and r.extra["requested_v"] is not None
              and r.extra["requested_v"] > r.applied_output[0] and r.applied_output[0] in (1.5, 1.0)]
    print(f"{len(capped)} capped control intervals")
    assert capped


@pytest.mark.criterion(8)
def test_c8_parameter_count(tmp_path):
    """4-128-1 has 769 parameters and off-by-one vectors are rejected"""
    assert param_count(PENDULUM_SPEC) == 769
    for n in (768, 770):
        with pytest.raises(WeightFileError):
            save_weights(tmp_path / "w.bin", PENDULUM_SPEC, np.zeros(n))
        with pytest.raises(ValueError):
            Policy(PENDULUM_SPEC, np.zeros(n))


@pytest.mark.criterion(9)
def test_c9_cab_properties(capsys):
    """10k-op CAB model check vs brute-force buffer; bench-ipc histogram sums to 10000"""
    assert model_check(10_000, 2024, 1, 0) > 0
    assert model_check(10_000, 2025, 4, 300) > 0
    assert main(["bench-ipc", "-n", "10000", "--size", "64"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["bin_upper_us", "count"]
    assert sum(int(c) for _, c in rows[1:]) == 10_000


@pytest.mark.criterion(10)
def test_c10_determinism(tmp_path):
    """every packaged scenario reruns (fresh interpreter) to byte-identical telemetry"""
    for name in SCENARIOS:
        sc = load_scenario(SCEN / f"{name}.yaml")
        cmd = "run-" + sc.plant
        for root in ("a", "b"):
            rc = main([cmd, str(SCEN / f"{name}.yaml"), "--out", str(tmp_path / root)]) if root == "a" else \
                subprocess.run([sys.executable, "-m", "dualsimplex.cli", cmd, str(SCEN / f"{name}.yaml"),
                                "--out", str(tmp_path / root)], capture_output=True, timeout=600).returncode
            assert rc == 0
        run = next((tmp_path / "a").glob(f"{sc.digest()[:12]}-*")).name
        for f in ("telemetry.csv", "telemetry.jsonl", "report.json"):
            assert (tmp_path / "a" / run / f).read_bytes() == (tmp_path / "b" / run / f).read_bytes(), (name, f)
