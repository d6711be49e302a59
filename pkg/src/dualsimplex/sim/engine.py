"""Single-threaded discrete-event loop shared by the plant runtimes.

Ordering at one instant: scripted events first, then task releases (safe
domain before rich, higher priority first), then one-shot callbacks in
insertion order.  Zero-cost tasks complete at release unless their domain
is stalled; a stalled release runs when the stall ends if that is still
within its deadline, otherwise it is recorded as a deadline miss.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .clock import SimClock
from .tasks import DOMAINS, TaskSpec, validate_tasks

EVENT, TASK, CALLBACK = 0, 1, 2


@dataclass
class ScheduleLog:
    """Per-release bookkeeping: (task, release_us, outcome, time_us)."""

    rows: list = field(default_factory=list)

    def misses(self, task: str | None = None) -> list:
        return [r for r in self.rows if r[2] == "deadline_miss" and (task is None or r[0] == task)]


class Simulator:
    def __init__(self, tasks, horizon_us: int):
        self.tasks = list(tasks)
        validate_tasks(self.tasks)
        self.horizon = int(horizon_us)
        self.clock = SimClock()
        self._heap: list = []
        self._seq = 0
        self._handlers: dict = {}
        self.stalls: dict = {d: [] for d in DOMAINS}
        self.schedule_log = ScheduleLog()
        self.before_dispatch = None  # hook(t) run before anything at a new instant

    def _push(self, t, cls, key, item):
        self._seq += 1
        heapq.heappush(self._heap, (int(t), cls, key, self._seq, item))

    def add_task(self, spec: TaskSpec, handler) -> None:
        if spec not in self.tasks:
            raise ValueError(f"task {spec.name} not declared")
        self._handlers[spec.name] = handler
        self._push(0, TASK, (DOMAINS.index(spec.domain), -spec.priority), ("release", spec, 0))

    def at(self, t: int, fn, cls: int = CALLBACK) -> None:
        if t < self.clock.now:
            raise ValueError("cannot schedule in the past")
        self._push(t, cls, (0, 0), ("call", fn))

    def stall(self, domain: str, start: int, duration: int) -> None:
        for s, d in self.stalls[domain]:
            if s < start + duration and start < s + d:
                raise ValueError("overlapping stall windows")
        self.stalls[domain].append((int(start), int(duration)))

    def stalled_until(self, domain: str, t: int):
        for s, d in self.stalls[domain]:
            if s <= t < s + d:
                return s + d
        return None

    def run(self) -> None:
        last_t = None
        while self._heap:
            t, cls, key, _, item = heapq.heappop(self._heap)
            if t >= self.horizon and not (item[0] == "deferred"):
                continue
            if t != last_t:
                if self.before_dispatch is not None:
                    self.before_dispatch(t)
                self.clock.advance_to(t)
                last_t = t
            kind = item[0]
            if kind == "call":
                item[1](t)
            elif kind == "release":
                spec, k = item[1], item[2]
                nxt = t + spec.period
                if nxt < self.horizon:
                    self._push(nxt, TASK, key, ("release", spec, k + 1))
                self._release(spec, t, t, key)
            elif kind == "deferred":
                spec, release = item[1], item[2]
                self._release(spec, release, t, key)

    def _release(self, spec: TaskSpec, release: int, t: int, key) -> None:
        end = self.stalled_until(spec.domain, t)
        if end is not None:
            if end <= release + spec.deadline and end < self.horizon:
                self._push(end, TASK, key, ("deferred", spec, release))
            else:
                self.schedule_log.rows.append((spec.name, release, "deadline_miss", release + spec.deadline))
            return
        self._handlers[spec.name](t, release)
        self.schedule_log.rows.append((spec.name, release, "complete", t))
