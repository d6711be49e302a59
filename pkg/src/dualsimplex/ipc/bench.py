"""Wall-clock round-trip benchmark over a shared single-writer buffer.

Two real threads play the safe and rich domains.  Each direction is a
seqlock: the writer bumps an odd sequence, copies the payload, then bumps
to even; the reader copies and retries if the sequence moved.  Readers
never take a lock, and the writer never waits for the reader.  Spinning
threads yield with ``os.sched_yield()`` and the interpreter's switch interval is
shortened for the duration of the run so the lock changes hands quickly.
"""

from __future__ import annotations

import os
import sys
import threading
import time
from dataclasses import dataclass

import numpy as np

# hand the core to the peer thread; matters on single-core hosts
_yield = getattr(os, "sched_yield", lambda: time.sleep(0))


class SeqlockSlot:
    def __init__(self, size: int):
        self.seq = 0
        self.buf = bytearray(size)

    def write(self, payload: bytes) -> None:
        self.seq += 1  # odd: write in progress
        self.buf[: len(payload)] = payload
        self.seq += 1

    def read(self):
        while True:
            s1 = self.seq
            if s1 & 1:
                _yield()
                continue
            data = bytes(self.buf)
            if self.seq == s1:
                return s1, data


@dataclass
class LatencyStats:
    samples_us: np.ndarray
    min: float
    max: float
    mean: float
    p50: float
    p99: float
    bin_upper_us: np.ndarray
    counts: np.ndarray

    def histogram_csv(self) -> str:
        rows = ["bin_upper_us,count"]
        rows += [f"{u:g},{int(c)}" for u, c in zip(self.bin_upper_us, self.counts)]
        return "\n".join(rows) + "\n"


def latency_stats(samples_us, bin_width: float = 1.0) -> LatencyStats:
    x = np.asarray(samples_us, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    top = max(bin_width, np.ceil(x.max() / bin_width) * bin_width)
    edges = np.arange(0.0, top + bin_width * 0.5, bin_width)
    if edges.size < 2:
        edges = np.array([0.0, bin_width])
    counts, edges = np.histogram(np.clip(x, 0, edges[-1]), bins=edges)
    return LatencyStats(x, float(x.min()), float(x.max()), float(x.mean()), float(np.percentile(x, 50)),
                        float(np.percentile(x, 99)), edges[1:], counts)


def bench_roundtrip(n: int, payload_size: int = 64, bin_width: float = 1.0) -> LatencyStats:
    """Time ``n`` ping/pong cycles Safe2Rich then Rich2Safe."""
    if n < 1:
        raise ValueError("n must be >= 1")
    safe2rich = SeqlockSlot(payload_size)
    rich2safe = SeqlockSlot(payload_size)
    payload = bytes(range(256)) * (payload_size // 256 + 1)
    payload = payload[:payload_size]
    stop = threading.Event()

    def rich():
        seen = 0
        while not stop.is_set():
            s, data = safe2rich.read()
            if s == seen:
                _yield()
                continue
            seen = s
            rich2safe.write(data)

    old_switch = sys.getswitchinterval()
    sys.setswitchinterval(1e-6)
    t = threading.Thread(target=rich, daemon=True)
    t.start()
    out = np.empty(n)
    seen = 0
    try:
        for i in range(n):
            t0 = time.perf_counter_ns()
            safe2rich.write(payload)
            while True:
                s, _ = rich2safe.read()
                if s != seen:
                    seen = s
                    break
                _yield()
            out[i] = (time.perf_counter_ns() - t0) / 1000.0
    finally:
        stop.set()
        t.join(timeout=5)
        sys.setswitchinterval(old_switch)
    return latency_stats(out, bin_width)
