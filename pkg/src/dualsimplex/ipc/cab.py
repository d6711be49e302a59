"""Cyclic Asynchronous Buffers between the safe and rich domains.

A CAB keeps the most recent messages in a ring of slots.  Writers never
block; readers always get the freshest complete message and reading does
not consume it.  Transport effects (latency, jitter, drops, stalls) are
applied at visibility time: a written message sits in flight until
``stamp + latency`` and only then is committed to a slot.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DEFAULT_SLOT_SIZE = 64
DEFAULT_CAPACITY = 8


class Direction(str, Enum):
    SAFE2RICH = "Safe2Rich"
    RICH2SAFE = "Rich2Safe"

    @property
    def writer(self) -> str:
        return "safe" if self is Direction.SAFE2RICH else "rich"

    @property
    def reader(self) -> str:
        return "rich" if self is Direction.SAFE2RICH else "safe"


class CabPermissionError(PermissionError):
    """Access from the wrong domain (models the hypervisor's port permissions)."""


@dataclass(frozen=True)
class Message:
    seq: int
    stamp: int  # us
    payload: bytes


@dataclass(frozen=True)
class PortStatus:
    last_read_seq: int | None
    age: int | None  # us since the freshest visible message was written

    @property
    def empty(self) -> bool:
        return self.last_read_seq is None


@dataclass
class ChannelFaultModel:
    base_latency: int = 0  # us
    jitter: int = 0  # us, uniform half-width
    drop_probability: float = 0.0
    stall_windows: list = field(default_factory=list)  # (start_us, duration_us)

    def __post_init__(self):
        if self.base_latency < 0 or self.jitter < 0:
            raise ValueError("latency and jitter must be >= 0")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in [0, 1]")
        self.stall_windows = sorted((int(s), int(d)) for s, d in self.stall_windows)

    def visible_at(self, t: int) -> int:
        """Push ``t`` past any stall window that contains it."""
        for s, d in self.stall_windows:
            if s <= t < s + d:
                t = s + d
        return t

    @classmethod
    def from_dict(cls, d: dict | None) -> "ChannelFaultModel":
        d = d or {}
        return cls(
            base_latency=int(d.get("base_latency_us", 0)),
            jitter=int(d.get("jitter_us", 0)),
            drop_probability=float(d.get("drop_probability", 0.0)),
            stall_windows=[tuple(w) for w in d.get("stall_windows_us", [])],
        )


class Cab:
    def __init__(self, name: str, direction: Direction | str, slot_size: int = DEFAULT_SLOT_SIZE,
                 capacity: int = DEFAULT_CAPACITY, fault: ChannelFaultModel | None = None, rng=None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if slot_size < 0:
            raise ValueError("slot_size must be >= 0")
        self.name = name
        self.direction = Direction(direction)
        self.slot_size = slot_size
        self.capacity = capacity
        self.fault = fault or ChannelFaultModel()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.slots: list = [None] * capacity
        self.write_index = 0
        self.latest_seq = 0  # last seq handed to a writer
        self._committed: Message | None = None
        self._pending: list = []  # heap of (visible_us, seq, Message)
        self.dropped = 0

    def _check(self, domain: str, role: str) -> None:
        want = self.direction.writer if role == "write" else self.direction.reader
        if domain != want:
            raise CabPermissionError(f"{domain} domain may not {role} {self.direction.value} channel {self.name!r}")

    def _commit(self, now: int) -> None:
        while self._pending and self._pending[0][0] <= now:
            _, seq, msg = heapq.heappop(self._pending)
            if self._committed is not None and seq < self._committed.seq:
                continue  # overtaken by a fresher message
            self.slots[self.write_index] = msg
            self.write_index = (self.write_index + 1) % self.capacity
            self._committed = msg

    def write(self, payload: bytes, now: int, domain: str) -> int:
        self._check(domain, "write")
        payload = bytes(payload)
        if len(payload) > self.slot_size:
            raise ValueError(f"payload of {len(payload)} bytes exceeds slot size {self.slot_size}")
        self._commit(now)
        self.latest_seq += 1
        seq = self.latest_seq
        f = self.fault
        # both draws happen on every write so the stream layout is fixed
        u_drop = self.rng.random()
        u_jit = self.rng.random()
        if u_drop < f.drop_probability:
            self.dropped += 1
            return seq
        lat = f.base_latency + (int(round((2.0 * u_jit - 1.0) * f.jitter)) if f.jitter else 0)
        vis = f.visible_at(now + max(lat, 0))
        heapq.heappush(self._pending, (vis, seq, Message(seq, int(now), payload)))
        self._commit(now)
        return seq

    def read_latest(self, now: int, domain: str):
        """(Message, age_us) for the freshest visible message, or None."""
        self._check(domain, "read")
        self._commit(now)
        m = self._committed
        if m is None:
            return None
        return m, now - m.stamp

    def status(self, now: int, domain: str) -> PortStatus:
        r = self.read_latest(now, domain)
        if r is None:
            return PortStatus(None, None)
        return PortStatus(r[0].seq, r[1])

    def add_stall(self, start: int, duration: int) -> None:
        self.fault.stall_windows = sorted(self.fault.stall_windows + [(int(start), int(duration))])


def cab_write(cab: Cab, payload: bytes, now: int, domain: str) -> int:
    return cab.write(payload, now, domain)


def cab_read_latest(cab: Cab, now: int, domain: str):
    return cab.read_latest(now, domain)


def is_fresh(status: PortStatus, max_age: int) -> bool:
    """True iff a message is visible and its age is within ``max_age`` (inclusive)."""
    return status.age is not None and status.age <= max_age


def encode_vector(values, slot_size: int = DEFAULT_SLOT_SIZE) -> bytes:
    """Little-endian float64 values, zero-padded to ``slot_size``."""
    raw = struct.pack(f"<{len(values)}d", *map(float, values))
    if len(raw) > slot_size:
        raise ValueError("vector does not fit in slot")
    return raw + bytes(slot_size - len(raw))


def decode_vector(payload: bytes, n: int) -> np.ndarray:
    return np.array(struct.unpack_from(f"<{n}d", payload), dtype=float)
