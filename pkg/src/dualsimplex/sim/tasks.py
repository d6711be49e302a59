"""Periodic fixed-priority tasks and an offline schedule simulator."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

DOMAINS = ("safe", "rich")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    name: str
    period: int  # us
    deadline: int  # us, relative to release
    priority: int  # higher runs first
    domain: str = "safe"
    cost: int = 0  # us of execution; zero models logical execution time

    def __post_init__(self):
        if self.period <= 0:
            raise ConfigError(f"{self.name}: period must be > 0")
        if not 0 < self.deadline <= self.period:
            raise ConfigError(f"{self.name}: need 0 < deadline <= period")
        if self.domain not in DOMAINS:
            raise ConfigError(f"{self.name}: unknown domain {self.domain!r}")
        if self.cost < 0:
            raise ConfigError(f"{self.name}: negative cost")

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        period = int(d["period_us"])
        return cls(
            name=str(d["name"]),
            period=period,
            deadline=int(d.get("deadline_us", period)),
            priority=int(d["priority"]),
            domain=str(d.get("domain", "safe")),
            cost=int(d.get("cost_us", 0)),
        )

    def to_dict(self) -> dict:
        return {"name": self.name, "period_us": self.period, "deadline_us": self.deadline,
                "priority": self.priority, "domain": self.domain, "cost_us": self.cost}


# Safe-domain task set of the pendulum controller board.
TABLE1_TASKS = (
    TaskSpec("SafetyMonitor", 2000, 2000, 4),
    TaskSpec("Control", 4000, 4000, 3),
    TaskSpec("Stream", 10000, 10000, 2),
    TaskSpec("Interface", 20000, 20000, 1),
)


def validate_tasks(tasks) -> None:
    seen: dict = {}
    names = set()
    for t in tasks:
        if t.name in names:
            raise ConfigError(f"duplicate task name {t.name!r}")
        names.add(t.name)
        key = (t.domain, t.priority)
        if key in seen:
            raise ConfigError(f"tasks {seen[key]!r} and {t.name!r} share priority {t.priority} in domain {t.domain}")
        seen[key] = t.name


def first_release_at_or_after(tasks, t: int) -> int:
    """Earliest release instant of any task that is >= t."""
    return min(-(-t // task.period) * task.period for task in tasks)


@dataclass(frozen=True)
class TraceEvent:
    time: int
    kind: str  # release | start | complete | deadline_miss
    task: str
    job: int


@dataclass
class ExecutionTrace:
    events: list = field(default_factory=list)

    def of_kind(self, kind: str, task: str | None = None) -> list:
        return [e for e in self.events if e.kind == kind and (task is None or e.task == task)]

    def completions(self, task: str) -> int:
        return len(self.of_kind("complete", task))

    def misses(self, task: str | None = None) -> list:
        return self.of_kind("deadline_miss", task)

    def order_at(self, t: int) -> list:
        """Task names in the order they started at instant ``t``."""
        return [e.task for e in self.events if e.kind == "start" and e.time == t]

    def releases(self, task: str) -> list:
        return [e.time for e in self.of_kind("release", task)]


def _schedule_domain(tasks, horizon: int, stalls) -> list:
    jobs = []
    for t in tasks:
        k = 0
        while k * t.period < horizon:
            jobs.append((k * t.period, -t.priority, t.name, k, t))
            k += 1
    jobs.sort(key=lambda j: (j[0], j[1]))
    stalls = sorted(stalls)
    out = []
    ready: list = []  # heap of (-prio, release, name, k)
    remaining = {}
    specs = {}
    started = set()
    i = 0
    now = 0

    def stalled_until(t):
        for s0, d in stalls:
            if s0 <= t < s0 + d:
                return s0 + d
        return None

    def next_stall_start(t):
        starts = [s0 for s0, _ in stalls if s0 > t]
        return min(starts) if starts else None

    while i < len(jobs) or ready:
        while i < len(jobs) and jobs[i][0] <= now:
            r, negp, name, k, spec = jobs[i]
            heapq.heappush(ready, (negp, r, name, k))
            remaining[(name, k)] = spec.cost
            specs[name] = spec
            out.append(TraceEvent(r, "release", name, k))
            i += 1
        # drop jobs whose absolute deadline has passed
        expired = [j for j in ready if j[1] + specs[j[2]].deadline <= now]
        for j in sorted(expired, key=lambda j: (j[1] + specs[j[2]].deadline, j[0])):
            ready.remove(j)
            out.append(TraceEvent(j[1] + specs[j[2]].deadline, "deadline_miss", j[2], j[3]))
        heapq.heapify(ready)
        horizon_next = jobs[i][0] if i < len(jobs) else None
        deadlines = [j[1] + specs[j[2]].deadline for j in ready]
        stall_end = stalled_until(now)
        if stall_end is not None:
            cands = [stall_end] + deadlines + ([horizon_next] if horizon_next is not None else [])
            now = min(cands)
            continue
        if not ready:
            if horizon_next is None:
                break
            now = horizon_next
            continue
        negp, r, name, k = ready[0]
        rem = remaining[(name, k)]
        if rem == 0:
            heapq.heappop(ready)
            out.append(TraceEvent(now, "start", name, k))
            out.append(TraceEvent(now, "complete", name, k))
            continue
        if (name, k) not in started:
            started.add((name, k))
            out.append(TraceEvent(now, "start", name, k))
        limit = [now + rem] + deadlines
        if horizon_next is not None:
            limit.append(horizon_next)
        s = next_stall_start(now)
        if s is not None:
            limit.append(s)
        t_next = min(x for x in limit if x > now)
        remaining[(name, k)] = rem - (t_next - now)
        now = t_next
        if remaining[(name, k)] == 0:
            heapq.heappop(ready)
            out.append(TraceEvent(now, "complete", name, k))
    return out


def schedule(tasks, horizon: float, stalls=None) -> ExecutionTrace:
    """Simulate preemptive fixed-priority execution of ``tasks``.

    ``horizon`` is in seconds; releases happen at k * period for
    k * period < horizon.  ``stalls`` is a list of (domain, start_us,
    duration_us) windows during which that domain executes nothing.  A job
    still unfinished at its absolute deadline is aborted with a
    deadline_miss event, so every release ends in exactly one completion or
    one miss.
    """
    tasks = list(tasks)
    validate_tasks(tasks)
    horizon_us = int(round(horizon * 1_000_000))
    stalls = list(stalls or [])
    events = []
    for dom in DOMAINS:
        dom_tasks = [t for t in tasks if t.domain == dom]
        if not dom_tasks:
            continue
        dom_stalls = [(int(s), int(d)) for sd, s, d in stalls if sd == dom]
        events.extend((e, DOMAINS.index(dom), n) for n, e in enumerate(_schedule_domain(dom_tasks, horizon_us, dom_stalls)))
    events.sort(key=lambda x: (x[0].time, x[1], x[2]))
    return ExecutionTrace([e for e, _, _ in events])
