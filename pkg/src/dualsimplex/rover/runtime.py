"""Closed-loop rover run: safe Control task, rich navigation network, channels.

Every Control period the safe domain scans, classifies the safety zone,
publishes the three distances on Safe2Rich and, 5 ms later, polls
Rich2Safe for the network's command.  The command is passed through the
zone cap or replaced by a full stop while the latch is engaged.  The rich
side runs the network on the latest scan, applies the attack factor and
switches to stop-and-spin once the goal marker is seen.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..ipc.cab import Cab, ChannelFaultModel, decode_vector, encode_vector
from ..neural.envs import rover_observation
from ..neural.mlp import Policy
from ..neural.weights import load_weights
from ..sim.clock import to_s, to_us
from ..sim.engine import CALLBACK, EVENT, Simulator
from ..sim.rng import seeded_rng
from ..sim.scenario import Scenario
from ..sim.tasks import TaskSpec, first_release_at_or_after
from ..sim.telemetry import TelemetryLog, TelemetryRecord
from ..simplex import Mode, MonitorVerdict, SwitchPolicy, Zone, decide
from . import world
from .geometry import box_polygon, min_distance, raycast_segments
from .plant import DriveParams, RoverCommand, RoverState, unicycle_step
from .safety import (FOOTPRINT, LIDAR_ANGLES, MAX_RANGE, AttackConfig, LidarDistances, SafetyZones, StopLatch,
                     apply_attack, goal_detected, safe_limit, zone_classify)

DATA = Path(__file__).resolve().parent.parent / "data"
DEFAULT_WEIGHTS = DATA / "rover.weights"
DEFAULT_MAP = DATA / "course_pinned.map"
CONTROL_TASK = TaskSpec("Control", 100_000, 100_000, 2, "safe")
NAV_TASK = TaskSpec("Navigation", 100_000, 100_000, 1, "rich")
POLL_DELAY_US = 5000
MAX_SUBSTEP_US = 10_000
SPIN_RATE = 1.0  # rad/s after the goal is detected
STATE_NAMES = ("x", "y", "heading", "v", "omega")
CONTROL_NAMES = ("v", "omega")
EXTRA_NAMES = ("d_left45", "d_front", "d_right45", "requested_v", "capped", "goal", "min_clearance")


def default_tasks():
    return [CONTROL_TASK, NAV_TASK]


@dataclass
class RoverSetup:
    course: world.CorridorMap
    policy: object  # callable obs -> (v, omega)
    zones: SafetyZones = field(default_factory=SafetyZones)
    drive: DriveParams = field(default_factory=DriveParams)
    eta: float = 1.0
    goal_enabled: bool = True  # stop-and-spin on marker detection
    ack_prompt: object = None  # callable(time_s) -> bool, asked once per latched stop


def load_course(spec) -> world.CorridorMap:
    """A map file path, "pinned", or {"generate": seed, "max_length": L}."""
    if spec is None or spec == "pinned":
        return world.pinned_course()
    if isinstance(spec, dict):
        return world.generate_course(int(spec["generate"]), float(spec.get("max_length", 20.0)))
    return world.load_map(spec)


def load_setup(cfg: dict) -> RoverSetup:
    course = load_course(cfg.get("map", DEFAULT_MAP if DEFAULT_MAP.exists() else "pinned"))
    wpath = cfg.get("weights", DEFAULT_WEIGHTS)
    policy = None
    if wpath is not None:
        spec, w = load_weights(wpath)
        policy = Policy(spec, w)
    return RoverSetup(course, policy, SafetyZones.from_dict(cfg.get("zones")),
                      DriveParams.from_dict(cfg.get("drive")), float(cfg.get("eta", 1.0)))


def _cab(name, direction, chans, rng, latency):
    c = chans.get(name, {})
    return Cab(name, direction, int(c.get("slot_size", 64)), int(c.get("capacity", 1)),
               ChannelFaultModel.from_dict(c.get("fault", {"base_latency_us": latency})), rng)


def spawn_polygon(args: dict, s: RoverState) -> np.ndarray:
    """Obstacle box from event args; ``frame: rover`` places it relative to the body.

    ``size`` is an edge length or a (length, width) pair.
    """
    pose = [float(v) for v in args["pose"]] + [0.0] * (3 - len(args["pose"]))
    x, y, th = pose[:3]
    if args.get("frame", "world") == "rover":
        c, sn = math.cos(s.heading), math.sin(s.heading)
        x, y, th = s.x + c * x - sn * y, s.y + sn * x + c * y, s.heading + th
    return box_polygon(x, y, args["size"], th)


def run_rover(sc: Scenario, setup: RoverSetup | None = None) -> TelemetryLog:
    setup = setup or load_setup(sc.plant_config)
    zones, drive = setup.zones, setup.drive
    policy = SwitchPolicy.from_dict(sc.policy, max_hp_age_us=50_000)
    tasks = sc.tasks or default_tasks()
    s2r = _cab("safe2rich", "Safe2Rich", sc.channels, seeded_rng(sc.seed, "cab-safe2rich"), 1000)
    r2s = _cab("rich2safe", "Rich2Safe", sc.channels, seeded_rng(sc.seed, "cab-rich2safe"), 2000)
    sim = Simulator(tasks, to_us(sc.duration))
    log = TelemetryLog("rover", STATE_NAMES, CONTROL_NAMES, extra_names=EXTRA_NAMES,
                       meta={"seed": sc.seed, "scenario": sc.digest(), "state_names": list(STATE_NAMES),
                             "control_names": list(CONTROL_NAMES), "extra_names": list(EXTRA_NAMES),
                             "plant": "rover", "zones": {"front": list(zones.front), "lateral": list(zones.lateral),
                                                         "caps": list(zones.caps)}})
    x0, y0, h0 = setup.course.start
    st = {
        "s": RoverState(x0, y0, h0),
        "t": 0,
        "cmd": RoverCommand(),
        "course": setup.course,
        "mode": Mode.HIGH_PERFORMANCE,
        "latch": StopLatch(),
        "ack": False,
        "attack": AttackConfig(setup.eta),
        "goal": False,
        "collisions": 0,
        "min_clear": math.inf,
        "miss_ptr": 0,
        "prompted": None,
    }

    def clearance():
        return min_distance(st["s"].x, st["s"].y, st["course"].segments) - FOOTPRINT

    def advance(t):
        while st["t"] < t:
            step = min(MAX_SUBSTEP_US, t - st["t"])
            st["s"] = unicycle_step(st["s"], st["cmd"], step * 1e-6, drive)
            st["t"] += step
            c = clearance()
            st["min_clear"] = min(st["min_clear"], c)
            if c <= 0:
                st["collisions"] += 1

    sim.before_dispatch = advance

    def scan():
        s = st["s"]
        r = raycast_segments(s.x, s.y, s.heading, LIDAR_ANGLES, st["course"].segments, MAX_RANGE)
        return LidarDistances.from_array(r)

    def misses_up_to(t):
        rows = sim.schedule_log.rows
        miss = False
        while st["miss_ptr"] < len(rows):
            r = rows[st["miss_ptr"]]
            if r[2] == "deadline_miss" and r[3] > t:
                break
            miss |= r[2] == "deadline_miss"
            st["miss_ptr"] += 1
        return miss

    def control(t, release):
        d = scan()
        zone = zone_classify(d, zones)
        s2r.write(encode_vector(d.as_array()), t, "safe")
        v = MonitorVerdict(zone=zone, operator_ack=st["ack"])
        st["ack"] = False
        new, cause = decide(st["mode"], v, policy)
        if new is not st["mode"]:
            log.transitions.append({"time_s": to_s(t), "from": st["mode"].value, "to": new.value,
                                    "cause": cause, "zone": zone.name})
            if new is Mode.SAFETY_STOP:
                st["latch"].engage(t)
            elif st["mode"] is Mode.SAFETY_STOP:
                st["latch"].acknowledge()
            st["mode"] = new
        log.monitor.append((to_s(t), zone.name, None, st["mode"].value))
        if st["mode"] is Mode.SAFETY_STOP:
            st["cmd"] = RoverCommand()
            if setup.ack_prompt is not None and st["prompted"] != st["latch"].engaged_at:
                st["prompted"] = st["latch"].engaged_at
                if setup.ack_prompt(to_s(t)):
                    st["ack"] = True
                    log.events.append({"time_s": to_s(t), "type": "operator_ack", "source": "interactive"})
        sim.at(t + POLL_DELAY_US, lambda tp: actuate(tp, release, d, zone), CALLBACK)

    def actuate(t, release, d, zone):
        r = r2s.read_latest(t, "safe")
        u_hp, age = None, None
        if r is not None:
            u_hp = RoverCommand(*(float(v) for v in decode_vector(r[0].payload, 2)))
            age = r[1]
        fresh = age is not None and age <= policy.max_hp_age
        if st["mode"] is Mode.SAFETY_STOP or not fresh:
            cmd = RoverCommand()
        else:
            cmd = safe_limit(u_hp, zone, st["latch"], zones, t)
        st["cmd"] = cmd
        s = st["s"]
        capped = fresh and u_hp is not None and st["mode"] is Mode.HIGH_PERFORMANCE and abs(cmd.v) < abs(u_hp.v)
        extra = {"d_left45": d.d_left45, "d_front": d.d_front, "d_right45": d.d_right45,
                 "requested_v": None if u_hp is None else u_hp.v, "capped": int(capped), "goal": int(st["goal"]),
                 "min_clearance": st["min_clear"]}
        log.records.append(TelemetryRecord(
            to_s(release), st["mode"].value, [s.x, s.y, s.heading, s.v_actual, s.omega_actual],
            None if u_hp is None else [u_hp.v, u_hp.omega], [cmd.v, cmd.omega], zone.name, age,
            misses_up_to(t), extra))

    def navigation(t, release):
        r = s2r.read_latest(t, "rich")
        if r is None or setup.policy is None:
            return
        s = st["s"]
        if setup.goal_enabled and not st["goal"] and goal_detected(s.x, s.y, s.heading, st["course"]):
            st["goal"] = True
            log.events.append({"time_s": to_s(t), "type": "goal_detected"})
        if st["goal"]:
            u = RoverCommand(0.0, SPIN_RATE)
        else:
            a = setup.policy(rover_observation(decode_vector(r[0].payload, 3)))
            u = apply_attack(RoverCommand(float(a[0]), float(a[1])), st["attack"])
        r2s.write(encode_vector(u.as_array()), t, "rich")

    def noop(t, release):
        pass

    handlers = {"Control": control, "Navigation": navigation}
    for spec in tasks:
        sim.add_task(spec, handlers.get(spec.name, noop))

    for ev in sc.events.events:
        t_eff = first_release_at_or_after(tasks, to_us(ev.time))
        if t_eff >= sim.horizon:
            continue

        def apply(t, ev=ev):
            if ev.kind == "spawn_obstacle":
                poly = spawn_polygon(ev.args, st["s"])
                st["course"] = st["course"].with_obstacle(poly)
            elif ev.kind == "set_attack_factor":
                st["attack"] = AttackConfig(float(ev.args["eta"]))
            elif ev.kind == "operator_ack":
                st["ack"] = True
            elif ev.kind == "stall_rich_domain":
                dur = to_us(ev.args["duration"])
                sim.stall("rich", t, dur)
                r2s.add_stall(t, dur)
            log.events.append({"time_s": to_s(t), "type": ev.kind, **ev.args})

        sim.at(t_eff, apply, EVENT)
    sim.run()
    log.meta["policy"] = {"exit_threshold": policy.exit_threshold, "enter_threshold": policy.enter_threshold,
                          "max_hp_age_us": policy.max_hp_age, "predict": policy.predict}
    log.meta["deadline_misses"] = len(sim.schedule_log.misses())
    log.meta["collisions"] = st["collisions"]
    log.meta["min_clearance"] = st["min_clear"]
    log.meta["goal_reached"] = st["goal"]
    return log


def bench_safe_step(n: int = 3000, bin_width: float = 5.0, seed: int = 0):
    """Wall-clock execution time of one safe-domain Control step (us).

    Scan, zone classification, channel write, channel read and the limiter,
    from poses spread along the pinned course.
    """
    import time

    from ..ipc.bench import latency_stats

    if n < 1:
        raise ValueError("n must be >= 1")
    course = world.pinned_course()
    rng = seeded_rng(seed, "bench-safe-step")
    s2r = Cab("safe2rich", "Safe2Rich", 64, 1)
    r2s = Cab("rich2safe", "Rich2Safe", 64, 1)
    r2s.write(encode_vector([1.0, 0.1]), 0, "rich")
    cl = course.centerline
    zones, latch = SafetyZones(), StopLatch()
    raycast_segments(0.0, 0.0, 0.0, LIDAR_ANGLES, course.segments, MAX_RANGE)  # compile outside the timing
    out = np.empty(n)
    for i in range(n):
        k = int(rng.integers(len(cl) - 1))
        p = cl[k] + rng.random() * (cl[k + 1] - cl[k])
        heading = float(rng.uniform(-math.pi, math.pi))
        t0 = time.perf_counter_ns()
        r = raycast_segments(float(p[0]), float(p[1]), heading, LIDAR_ANGLES, course.segments, MAX_RANGE)
        d = LidarDistances.from_array(r)
        zone = zone_classify(d, zones)
        s2r.write(encode_vector(r), i + 1, "safe")
        msg = r2s.read_latest(i + 1, "safe")
        safe_limit(RoverCommand(*decode_vector(msg[0].payload, 2)), zone, latch, zones)
        latch.acknowledge()
        out[i] = (time.perf_counter_ns() - t0) / 1000.0
    return latency_stats(out, bin_width)
