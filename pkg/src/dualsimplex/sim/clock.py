"""Simulation time in integer microseconds."""

from __future__ import annotations

from dataclasses import dataclass

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S


@dataclass
class SimClock:
    now: int = 0
    tick: int = 0

    def advance_to(self, t: int) -> None:
        if t < self.now:
            raise ValueError(f"time cannot go backwards ({t} < {self.now})")
        self.now = int(t)
        self.tick += 1
