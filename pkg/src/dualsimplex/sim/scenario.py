"""Scenario files: seed, duration, plant, tasks, channels, policy and events.

Scenarios are YAML documents with ``schema_version: 1``.  Times in the
event script are seconds; task periods and channel latencies are integer
microseconds (keys ending in ``_us``).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .tasks import ConfigError, TaskSpec

SCHEMA_VERSION = 1
PLANTS = ("pendulum", "rover")
EVENT_FIELDS = {
    "disturbance": ("value",),
    "spawn_obstacle": ("pose", "size"),
    "set_attack_factor": ("eta",),
    "operator_ack": (),
    "stall_rich_domain": ("duration",),
    "set_reference": ("value",),
}
PLANT_EVENTS = {
    "pendulum": {"disturbance", "stall_rich_domain", "set_reference"},
    "rover": {"spawn_obstacle", "set_attack_factor", "operator_ack", "stall_rich_domain"},
}


class ScenarioError(ConfigError):
    pass


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    args: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"time": self.time, "type": self.kind, **self.args}


@dataclass
class EventScript:
    events: list = field(default_factory=list)

    def __post_init__(self):
        self.events = sorted(self.events, key=lambda e: e.time)
        stalls = [(e.time, e.time + e.args["duration"]) for e in self.events if e.kind == "stall_rich_domain"]
        for (a0, a1), (b0, b1) in zip(stalls, stalls[1:]):
            if b0 < a1:
                raise ScenarioError("stall windows overlap")

    @classmethod
    def from_list(cls, items) -> "EventScript":
        out = []
        for raw in items or []:
            if not isinstance(raw, dict) or "time" not in raw or "type" not in raw:
                raise ScenarioError(f"unparseable event {raw!r}")
            kind = raw["type"]
            if kind not in EVENT_FIELDS:
                raise ScenarioError(f"unknown event type {kind!r}")
            args = {k: v for k, v in raw.items() if k not in ("time", "type")}
            missing = [k for k in EVENT_FIELDS[kind] if k not in args]
            if missing:
                raise ScenarioError(f"event {kind} at {raw['time']} lacks {missing}")
            try:
                t = float(raw["time"])
                if kind == "stall_rich_domain":
                    args["duration"] = float(args["duration"])
                    if args["duration"] <= 0:
                        raise ValueError
                if kind == "set_attack_factor":
                    args["eta"] = float(args["eta"])
                    if args["eta"] <= 0:
                        raise ValueError
                if kind in ("disturbance", "set_reference"):
                    args["value"] = [float(v) for v in args["value"]]
                if kind == "spawn_obstacle":
                    args["pose"] = [float(v) for v in args["pose"]]
                    size = args["size"]
                    size = [float(v) for v in size] if isinstance(size, (list, tuple)) else float(size)
                    if len(args["pose"]) not in (2, 3) or min(size if isinstance(size, list) else [size]) <= 0:
                        raise ValueError
                    args["size"] = size
                    if args.get("frame", "world") not in ("world", "rover"):
                        raise ValueError
            except (TypeError, ValueError):
                raise ScenarioError(f"bad arguments for event {raw!r}") from None
            out.append(Event(t, kind, args))
        return cls(out)

    def to_list(self) -> list:
        return [e.to_dict() for e in self.events]


@dataclass
class Scenario:
    seed: int
    duration: float
    plant: str
    tasks: list = field(default_factory=list)
    events: EventScript = field(default_factory=EventScript)
    channels: dict = field(default_factory=dict)  # name -> {slot_size, capacity, fault}
    policy: dict = field(default_factory=dict)
    output: str | None = None
    plant_config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.plant not in PLANTS:
            raise ScenarioError(f"unknown plant {self.plant!r}")
        if self.duration <= 0:
            raise ScenarioError("duration must be > 0")
        for e in self.events.events:
            if not 0 <= e.time <= self.duration:
                raise ScenarioError(f"event {e.kind} at {e.time} s outside [0, {self.duration}]")
            if e.kind not in PLANT_EVENTS[self.plant]:
                raise ScenarioError(f"event {e.kind} does not apply to the {self.plant} plant")

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "duration": self.duration,
            "plant": self.plant,
            "tasks": [t.to_dict() for t in self.tasks],
            "events": self.events.to_list(),
            "channels": copy.deepcopy(self.channels),
            "policy": copy.deepcopy(self.policy),
            self.plant: copy.deepcopy(self.plant_config),
        }
        if self.output is not None:
            d["output"] = self.output
        return d

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def copy(self, **changes) -> "Scenario":
        d = copy.deepcopy(self.__dict__)
        d.update(changes)
        return Scenario(**d)

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a mapping")
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported schema_version {d.get('schema_version')!r}")
        try:
            plant = str(d["plant"])
            tasks = [TaskSpec.from_dict(t) for t in d.get("tasks") or []]
            sc = cls(
                seed=int(d.get("seed", 0)),
                duration=float(d["duration"]),
                plant=plant,
                tasks=tasks,
                events=EventScript.from_list(d.get("events")),
                channels=dict(d.get("channels") or {}),
                policy=dict(d.get("policy") or {}),
                output=d.get("output"),
                plant_config=dict(d.get(plant) or {}),
            )
        except KeyError as e:
            raise ScenarioError(f"missing scenario field {e}") from None
        except (TypeError, ValueError) as e:
            if isinstance(e, ScenarioError):
                raise
            raise ScenarioError(str(e)) from None
        if base_dir is not None:
            # resolve relative file references against the scenario's folder
            for key, val in list(sc.plant_config.items()):
                if isinstance(val, str) and key in ("params", "cert", "weights", "map"):
                    p = Path(val)
                    if not p.is_absolute() and (Path(base_dir) / p).exists():
                        sc.plant_config[key] = str(Path(base_dir) / p)
        return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ScenarioError(f"{path}: {e}") from None
    return Scenario.from_dict(data, base_dir=path.parent)


def save_scenario(path, sc: Scenario) -> None:
    Path(path).write_text(yaml.safe_dump(sc.to_dict(), sort_keys=False))
