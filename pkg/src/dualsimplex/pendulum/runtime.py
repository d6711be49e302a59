"""Closed-loop pendulum run: safe domain tasks, rich-domain network, channels.

Safe domain (Table-1 task set): SafetyMonitor every 2 ms evaluates the
instability index and port freshness and updates the supervisor mode;
Control every 4 ms senses the plant, publishes the state on Safe2Rich,
reads the freshest network output from Rich2Safe and applies the output
of the active controller.  Rich domain: the network task (4 ms) reads the
state, smooths its action over two samples and publishes it, so the safe
side applies it one Control period later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..ipc.cab import Cab, ChannelFaultModel, decode_vector, encode_vector, is_fresh
from ..neural.envs import PENDULUM_U_SCALE
from ..neural.mlp import Policy
from ..neural.weights import load_weights
from ..sim.clock import to_s, to_us
from ..sim.engine import EVENT, Simulator
from ..sim.rng import seeded_rng
from ..sim.scenario import Scenario
from ..sim.tasks import TABLE1_TASKS, TaskSpec, first_release_at_or_after
from ..sim.telemetry import TelemetryLog, TelemetryRecord
from ..simplex import Mode, MonitorVerdict, SwitchPolicy, decide, select_actuation
from . import kernels
from .control import SafeGain, SwingUpGains, linearize, pole_place, safe_control, smooth_action, swing_up
from .dynamics import STATE_NAMES, predict_one_step
from .params import PendulumParams, default_params_path, load_params
from .roa import EllipsoidCert

DATA = Path(__file__).resolve().parent.parent / "data"
DEFAULT_CERT = DATA / "pendulum_cert.txt"
DEFAULT_WEIGHTS = DATA / "pendulum.weights"
HP_TASK = TaskSpec("HPController", 4000, 4000, 1, "rich")
MAX_SUBSTEP_US = 1000


def default_tasks():
    return list(TABLE1_TASKS) + [HP_TASK]


@dataclass
class PendulumSetup:
    params: PendulumParams
    gain: SafeGain
    cert: EllipsoidCert
    policy: object  # callable obs -> array, or None
    swing: SwingUpGains = field(default_factory=SwingUpGains)
    x0: np.ndarray = field(default_factory=lambda: np.array([math.pi - 0.05, 0.0, 0.0, 0.0]))
    start_mode: Mode = Mode.SWING_UP


def load_setup(cfg: dict) -> PendulumSetup:
    p = load_params(cfg.get("params", default_params_path()))
    A, B = linearize(p)
    g = pole_place(A, B, tuple(cfg.get("poles", (-6.0, -7.0, -8.0, -9.0))))
    cert = EllipsoidCert.load(cfg.get("cert", DEFAULT_CERT))
    wpath = cfg.get("weights", DEFAULT_WEIGHTS)
    policy = None
    if wpath is not None:
        spec, w = load_weights(wpath)
        policy = Policy(spec, w)
    sw = SwingUpGains(**cfg.get("swing_up", {}))
    x0 = np.array(cfg.get("initial_state", [math.pi - 0.05, 0.0, 0.0, 0.0]), dtype=float)
    return PendulumSetup(p, g, cert, policy, sw, x0, Mode(cfg.get("start_mode", "SwingUp")))


def _cab(name, direction, chans, rng, slot=64, capacity=1):
    c = chans.get(name, {})
    return Cab(name, direction, int(c.get("slot_size", slot)), int(c.get("capacity", capacity)),
               ChannelFaultModel.from_dict(c.get("fault", {"base_latency_us": 200})), rng)


def run_pendulum(sc: Scenario, setup: PendulumSetup | None = None) -> TelemetryLog:
    setup = setup or load_setup(sc.plant_config)
    p, cert = setup.params, setup.cert
    gain = setup.gain
    policy = SwitchPolicy.from_dict(sc.policy)
    tasks = sc.tasks or default_tasks()
    by_name = {t.name: t for t in tasks}
    ctrl_period = by_name["Control"].period
    dt_ctrl = ctrl_period * 1e-6
    coeffs = p.coeffs()
    umax = p.voltage_limit
    s2r = _cab("safe2rich", "Safe2Rich", sc.channels, seeded_rng(sc.seed, "cab-safe2rich"))
    r2s = _cab("rich2safe", "Rich2Safe", sc.channels, seeded_rng(sc.seed, "cab-rich2safe"))
    sim = Simulator(tasks, to_us(sc.duration))
    log = TelemetryLog("pendulum", STATE_NAMES, ("u",),
                       meta={"seed": sc.seed, "scenario": sc.digest(), "state_names": list(STATE_NAMES),
                             "control_names": ["u"], "extra_names": [], "plant": "pendulum"})

    st = {
        "x": setup.x0.astype(float).copy(),
        "t": 0,
        "u": 0.0,
        "mode": setup.start_mode,
        "verdict": None,
        "miss_ptr": 0,
        "hp_prev_raw": 0.0,
    }

    def advance(t):
        dt_us = t - st["t"]
        if dt_us > 0:
            n = max(1, -(-dt_us // MAX_SUBSTEP_US))
            st["x"] = kernels.integrate(st["x"], st["u"], dt_us * 1e-6, n, coeffs)
            if not np.all(np.abs(st["x"]) < 1e6):
                raise FloatingPointError(f"pendulum state diverged at t={to_s(t)}")
            st["t"] = t

    sim.before_dispatch = advance

    def err(x):
        e = np.asarray(x, dtype=float) - gain.reference
        e[0] = kernels.wrap_angle(e[0])
        e[1] = kernels.wrap_angle(e[1])
        return e

    def index_of(x):
        e = err(x)
        return float(e @ cert.P @ e)

    def latest_hp(t):
        r = r2s.read_latest(t, "safe")
        if r is None:
            return None, None
        return float(decode_vector(r[0].payload, 1)[0]), r[1]

    def monitor(t, release):
        x = st["x"]
        idx = index_of(x)
        u_hp, age = latest_hp(t)
        fresh = age is not None and age <= policy.max_hp_age
        pred = None
        if policy.predict and u_hp is not None:
            pred = index_of(predict_one_step(x, u_hp, p, dt_ctrl))
        v = MonitorVerdict(index=idx, hp_fresh=fresh, predicted_index=pred)
        new, cause = decide(st["mode"], v, policy)
        if new is not st["mode"]:
            log.transitions.append({"time_s": to_s(t), "from": st["mode"].value, "to": new.value,
                                    "cause": cause, "index": idx})
            st["mode"] = new
        st["verdict"] = v
        log.monitor.append((to_s(t), idx, fresh, st["mode"].value))

    def control(t, release):
        x = st["x"].copy()
        s2r.write(encode_vector(x), t, "safe")
        u_hp, age = latest_hp(t)
        u_safe = safe_control(x, gain, umax)
        u_sw = swing_up(x, setup.swing, p)
        mode = st["mode"]
        u = select_actuation(mode, u_hp if u_hp is not None else 0.0, u_safe, u_sw)
        u = float(min(max(u, -umax), umax))
        st["u"] = u
        v = st["verdict"]
        rows = sim.schedule_log.rows
        miss = False
        while st["miss_ptr"] < len(rows):
            r = rows[st["miss_ptr"]]
            if r[2] == "deadline_miss" and r[3] > t:
                break
            miss |= r[2] == "deadline_miss"
            st["miss_ptr"] += 1
        log.records.append(TelemetryRecord(
            to_s(release), mode.value, [float(c) for c in x],
            None if u_hp is None else [u_hp], [u],
            None if v is None else v.index, age, miss))

    def hp_task(t, release):
        r = s2r.read_latest(t, "rich")
        if r is None or setup.policy is None:
            return
        x = decode_vector(r[0].payload, 4)
        x[0] = kernels.wrap_angle(x[0])
        x[1] = kernels.wrap_angle(x[1])
        raw = float(setup.policy(x)[0]) * PENDULUM_U_SCALE
        u = smooth_action(raw, st["hp_prev_raw"])
        st["hp_prev_raw"] = raw
        r2s.write(encode_vector([u]), t, "rich")

    def noop(t, release):
        pass

    handlers = {"SafetyMonitor": monitor, "Control": control, "HPController": hp_task}
    for spec in tasks:
        sim.add_task(spec, handlers.get(spec.name, noop))

    for ev in sc.events.events:
        t_eff = first_release_at_or_after(tasks, to_us(ev.time))
        if t_eff >= sim.horizon:
            continue

        def apply(t, ev=ev):
            nonlocal gain
            if ev.kind == "disturbance":
                st["x"] = st["x"] + np.asarray(ev.args["value"], dtype=float)
            elif ev.kind == "stall_rich_domain":
                d = to_us(ev.args["duration"])
                sim.stall("rich", t, d)
                r2s.add_stall(t, d)
            elif ev.kind == "set_reference":
                gain = gain.with_reference(ev.args["value"])
            log.events.append({"time_s": to_s(t), "type": ev.kind, **ev.args})

        sim.at(t_eff, apply, EVENT)
    sim.run()
    log.meta["policy"] = {"exit_threshold": policy.exit_threshold, "enter_threshold": policy.enter_threshold,
                          "max_hp_age_us": policy.max_hp_age, "predict": policy.predict}
    log.meta["deadline_misses"] = len(sim.schedule_log.misses())
    return log
