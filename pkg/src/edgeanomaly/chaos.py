"""Anomaly-phase event scheduling and per-window effect lookup."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .config import AnomalyKind, GenerationConfig
from .workload import ClientAnomalyShape

MAX_CPU_HOG = 0.99
NET_DELAY_UNIT_MS = 100.0
MEM_STRESS_UNIT_MIB = 1024.0


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class AnomalyEvent:
    kind: AnomalyKind
    target: str
    start: int
    duration: int
    magnitude: float

    @property
    def end(self) -> int:
        return self.start + self.duration

    def intersects(self, t0: float, t1: float) -> bool:
        return self.start < t1 and t0 < self.end

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnomalyEvent":
        return cls(AnomalyKind(d["kind"]), d["target"], int(d["start"]), int(d["duration"]), float(d["magnitude"]))


@dataclass(frozen=True)
class ActiveEffects:
    cpu_hog_fraction: float = 0.0
    mem_stress_mib: float = 0.0
    net_delay_add: float = 0.0


@dataclass(frozen=True)
class WindowEffects:
    effects: ActiveEffects
    label: bool
    kind: AnomalyKind | None


def build_schedule(cfg: GenerationConfig, rng: np.random.Generator) -> list[AnomalyEvent]:
    """Place every configured event uniformly at random inside the anomaly phase.

    For k events of length d in a phase of length L the gaps are drawn as sorted
    integer offsets in [0, L - k*d]; shifting the i-th offset by i*d gives a uniform
    draw over all non-overlapping arrangements.
    """
    phase_start, length = cfg.normal_duration, cfg.anomaly_phase_duration
    events = []
    if length == 0:
        return events
    for spec in cfg.anomalies:
        k, d = spec.event_count, spec.event_duration
        slack = length - k * d
        if slack < 0:
            raise ScheduleError(f"{spec.kind.value} on {spec.target}: {k} x {d}s does not fit in {length}s")
        offsets = np.sort(rng.integers(0, slack, size=k, endpoint=True))
        for i, off in enumerate(offsets):
            events.append(AnomalyEvent(spec.kind, spec.target, phase_start + int(off) + i * d, d, float(spec.magnitude)))
    events.sort(key=lambda e: (e.start, e.kind.value, e.target))
    return events


def effects_at(schedule: list[AnomalyEvent], target: str, t0: float, t1: float, entry: str | None = None) -> WindowEffects:
    """Aggregate the events touching ``[t0, t1)`` for `target`.

    Any intersection counts.  Client-side events land on `entry` only; their rate
    factor is applied by the workload, so they contribute a label but no effect here.
    """
    if t1 <= t0:
        raise ValueError("window must have t1 > t0")
    cpu = mem = net = 0.0
    label_kind = None
    for ev in sorted(schedule, key=lambda e: e.start):
        if not ev.intersects(t0, t1):
            continue
        if ev.kind.side == "client":
            if target != entry:
                continue
        else:
            if ev.target != target:
                continue
            if ev.kind is AnomalyKind.CPU_HOG:
                cpu += ev.magnitude
            elif ev.kind is AnomalyKind.MEMORY_STRESS:
                ramp = min(1.0, max(0.0, (t1 - ev.start) / ev.duration))
                mem += ev.magnitude * MEM_STRESS_UNIT_MIB * ramp
            elif ev.kind is AnomalyKind.NETWORK_DELAY:
                net += ev.magnitude * NET_DELAY_UNIT_MS
        if label_kind is None:
            label_kind = ev.kind
    return WindowEffects(ActiveEffects(min(cpu, MAX_CPU_HOG), mem, net), label_kind is not None, label_kind)


def client_shapes(schedule: list[AnomalyEvent]) -> list[ClientAnomalyShape]:
    return [
        ClientAnomalyShape(ev.kind.value, ev.magnitude, ev.start, ev.duration)
        for ev in schedule
        if ev.kind.side == "client"
    ]
