"""Telemetry records, CSV / JSON-lines export."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

NA = "NA"


@dataclass
class TelemetryRecord:
    time: float  # s, Control release
    mode: str
    state: list
    hp_output: list | None  # None when no fresh-or-stale value exists
    applied_output: list
    index_or_zone: float | str | None
    freshness_age: int | None  # us
    deadline_miss: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "time_s": self.time,
            "mode": self.mode,
            "state": list(self.state),
            "hp_u": None if self.hp_output is None else list(self.hp_output),
            "applied_u": list(self.applied_output),
            "index_or_zone": self.index_or_zone,
            "freshness_us": self.freshness_age,
            "deadline_miss": self.deadline_miss,
            **({"extra": self.extra} if self.extra else {}),
        }


@dataclass
class TelemetryLog:
    plant: str
    state_names: tuple
    control_names: tuple
    records: list = field(default_factory=list)
    transitions: list = field(default_factory=list)  # dicts: time_s, from, to, cause
    events: list = field(default_factory=list)  # dicts: time_s, type, ...
    extra_names: tuple = ()
    meta: dict = field(default_factory=dict)
    monitor: list = field(default_factory=list)  # (time_s, index_or_zone, fresh, mode) per monitor run

    def columns(self) -> list:
        cols = ["time_s", "mode"] + list(self.state_names)
        cols += [f"hp_{c}" for c in self.control_names] + [f"applied_{c}" for c in self.control_names]
        cols += ["index_or_zone", "freshness_us", "deadline_miss"] + list(self.extra_names)
        return cols

    def rows(self):
        for r in self.records:
            hp = r.hp_output if r.hp_output is not None else [None] * len(self.control_names)
            row = [r.time, r.mode] + list(r.state) + list(hp) + list(r.applied_output)
            row += [r.index_or_zone, r.freshness_age, int(r.deadline_miss)]
            row += [r.extra.get(k) for k in self.extra_names]
            yield [NA if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in row]

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for row in self.rows():
            w.writerow(row)
        return buf.getvalue()

    def jsonl_text(self) -> str:
        lines = [json.dumps({"meta": self.meta, "plant": self.plant}, sort_keys=True)]
        lines += [json.dumps({"record": r.to_dict()}, sort_keys=True) for r in self.records]
        lines += [json.dumps({"transition": t}, sort_keys=True) for t in self.transitions]
        lines += [json.dumps({"event": e}, sort_keys=True) for e in self.events]
        lines += [json.dumps({"monitor": list(m)}) for m in self.monitor]
        return "\n".join(lines) + "\n"

    def write(self, path_stem) -> tuple:
        stem = Path(path_stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        csv_p = stem.with_suffix(".csv")
        js_p = stem.with_suffix(".jsonl")
        csv_p.write_text(self.csv_text())
        js_p.write_text(self.jsonl_text())
        return csv_p, js_p


def read_jsonl(path) -> TelemetryLog:
    meta, plant = {}, ""
    records, transitions, events, monitor = [], [], [], []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if "meta" in obj:
            meta, plant = obj["meta"], obj["plant"]
        elif "record" in obj:
            d = obj["record"]
            records.append(TelemetryRecord(d["time_s"], d["mode"], d["state"], d["hp_u"], d["applied_u"],
                                           d["index_or_zone"], d["freshness_us"], d["deadline_miss"], d.get("extra", {})))
        elif "transition" in obj:
            transitions.append(obj["transition"])
        elif "event" in obj:
            events.append(obj["event"])
        elif "monitor" in obj:
            monitor.append(tuple(obj["monitor"]))
    log = TelemetryLog(plant, tuple(meta.get("state_names", ())), tuple(meta.get("control_names", ())),
                       records, transitions, events, tuple(meta.get("extra_names", ())), meta, monitor)
    return log
