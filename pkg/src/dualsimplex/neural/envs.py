"""Training environments for the two high-performance controllers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..pendulum import kernels as pk
from ..pendulum.control import smooth_action
from ..pendulum.params import PendulumParams
from ..rover import world
from ..rover.geometry import raycast_segments
from ..rover.plant import DriveParams, RoverCommand, RoverState, unicycle_step
from ..rover.safety import FOOTPRINT, LIDAR_ANGLES, MAX_RANGE, LidarDistances, SafetyZones, goal_detected, zone_classify
from ..simplex import Zone
from ..sim.rng import seeded_rng
from .mlp import Policy


@dataclass
class EpisodeResult:
    total_reward: float
    steps: int
    termination: str  # horizon | failure | goal | collision
    step_rewards: list = field(default_factory=list)
    terminal_reward: float = 0.0


# --- pendulum -----------------------------------------------------------------

PENDULUM_U_SCALE = 10.0  # V per unit of network output


@dataclass
class PendulumEnv:
    """Stabilization around upright with random pushes.

    Initial states are drawn from a box around upright or, with ``init_P``,
    uniformly from an ellipsoid (the set in which the supervisor hands over
    to the network).  Per 4 ms step the network sees the wrapped state; its
    output, scaled to volts, is smoothed over two samples and applied one
    step later, matching the one-period hand-off through the channel at
    runtime.  Reward is 1 - 0.1 |u| on the applied (saturated) voltage.
    """

    seed: int = 0
    params: PendulumParams = field(default_factory=PendulumParams)
    horizon: int = 1000
    dt: float = 0.004
    substeps: int = 4
    theta_limit: float = math.radians(20.0)
    alpha_limit: float = math.radians(45.0)
    init_spread: tuple = (0.05, 0.05, 0.1, 0.1)
    init_P: np.ndarray | None = None  # start uniformly inside {x : x^T P x < 1} instead
    push_rate: float = 0.5  # pushes per second
    push_band: tuple = (0.3, 0.8)  # |delta dtheta_p| in rad/s
    episodes: int = 1

    def episode(self, policy, seed: int) -> EpisodeResult:
        rng = seeded_rng(seed, "pendulum-env")
        c = self.params.coeffs()
        umax = self.params.voltage_limit
        if self.init_P is None:
            x = rng.uniform(-1, 1, 4) * np.array(self.init_spread)
        else:
            z = rng.standard_normal(4)
            z *= rng.random() ** 0.25 / np.linalg.norm(z)
            x = np.linalg.solve(np.linalg.cholesky(self.init_P).T, z)
        # Poisson push times, in steps
        pushes = {}
        t = rng.exponential(1.0 / self.push_rate)
        while t < self.horizon * self.dt:
            mag = rng.uniform(*self.push_band) * (1 if rng.random() < 0.5 else -1)
            pushes[int(t / self.dt)] = mag
            t += rng.exponential(1.0 / self.push_rate)
        u_prev_raw = 0.0
        u_apply = 0.0
        rewards = []
        term = "horizon"
        for k in range(self.horizon):
            if k in pushes:
                x[2] += pushes[k]
            obs = x.copy()
            obs[0] = pk.wrap_angle(obs[0])
            obs[1] = pk.wrap_angle(obs[1])
            u_raw = float(policy(obs)[0]) * PENDULUM_U_SCALE
            u_next = smooth_action(u_raw, u_prev_raw)
            u_prev_raw = u_raw
            ua = min(max(u_apply, -umax), umax)
            x = pk.integrate(x, ua, self.dt, self.substeps, c)
            u_apply = u_next
            rewards.append(1.0 - 0.1 * abs(ua))
            if not np.all(np.isfinite(x)) or abs(pk.wrap_angle(x[0])) > self.theta_limit or abs(x[1]) > self.alpha_limit:
                term = "failure"
                break
        return EpisodeResult(float(sum(rewards)), len(rewards), term, rewards, 0.0)

    def evaluate(self, spec, w) -> float:
        pol = Policy(spec, w)
        return float(np.mean([self.episode(pol, self.seed * 1000 + i).total_reward for i in range(self.episodes)]))


def pendulum_env(seed: int, **kw) -> PendulumEnv:
    return PendulumEnv(seed=seed, **kw)


# --- rover --------------------------------------------------------------------

GOAL_REWARD = 300.0
COLLISION_REWARD = -100.0
OBS_CLIP = 5.0


def rover_observation(ranges) -> np.ndarray:
    return np.minimum(np.asarray(ranges, dtype=float), OBS_CLIP) / OBS_CLIP


@dataclass
class RoverEnv:
    """Corridor navigation; per-step reward D - 1, terminal +300 / -100.

    D is the forward progress along the corridor centerline during the
    step.  The command computed from a scan takes effect 5 ms after the
    scan, as in the runtime loop.  With ``zones`` set, the safe-domain
    limiter is in the loop: speed caps apply and entering Z3 ends the
    episode as a failure scored like a collision.
    """

    seed: int = 0
    courses: list = field(default_factory=list)
    horizon: int = 1000
    dt: float = 0.1
    actuation_delay: float = 0.005
    drive: DriveParams = field(default_factory=DriveParams)
    eta: float = 1.0
    footprint: float = FOOTPRINT
    zones: SafetyZones | None = None

    def episode(self, policy, course) -> EpisodeResult:
        s = RoverState(*course.start, 0.0, 0.0)
        cmd = RoverCommand()
        prog = course.progress(s.x, s.y)
        rewards = []
        term = "horizon"
        terminal = 0.0
        for k in range(self.horizon):
            ranges = raycast_segments(s.x, s.y, s.heading, LIDAR_ANGLES, course.segments, MAX_RANGE)
            a = policy(rover_observation(ranges))
            s = unicycle_step(s, cmd, self.actuation_delay, self.drive)
            cmd = RoverCommand(float(a[0]) * self.eta, float(a[1]) * self.eta)
            if self.zones is not None:
                zone = zone_classify(LidarDistances.from_array(ranges), self.zones)
                if zone == Zone.Z3:
                    rewards.append(-1.0)
                    term, terminal = "failure", COLLISION_REWARD
                    break
                cap = self.zones.cap(zone)
                if cap is not None:
                    cmd = RoverCommand(min(max(cmd.v, -cap), cap), cmd.omega)
            s = unicycle_step(s, cmd, self.dt - self.actuation_delay, self.drive)
            p = course.progress(s.x, s.y)
            rewards.append(p - prog - 1.0)
            prog = p
            if world.collision_check(s.x, s.y, course, self.footprint):
                term, terminal = "collision", COLLISION_REWARD
                break
            if goal_detected(s.x, s.y, s.heading, course):
                term, terminal = "goal", GOAL_REWARD
                break
        return EpisodeResult(float(sum(rewards) + terminal), len(rewards), term, rewards, terminal)

    def evaluate(self, spec, w) -> float:
        pol = Policy(spec, w)
        return float(np.mean([self.episode(pol, c).total_reward for c in self.courses]))


def rover_env(seed: int, n_courses: int = 6, max_length: float = 20.0, **kw) -> RoverEnv:
    courses = [world.generate_course(seed * 1000 + i, max_length) for i in range(n_courses)]
    return RoverEnv(seed=seed, courses=courses, **kw)
