"""Microservice application model: QoS classes, DAG wiring and per-request cost parameters."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable


class Latency(str, Enum):
    LC = "LC"
    LT = "LT"


class Throughput(str, Enum):
    HTP = "HTp"
    MTP = "MTp"
    LTP = "LTp"


class Compute(str, Enum):
    HCI = "HCI"
    MCI = "MCI"
    NONE = "none"


class PatternRole(str, Enum):
    CHAINED = "chained"
    AGGREGATOR = "aggregator"
    PASSTHROUGH = "passthrough"


class Protocol(str, Enum):
    HTTP = "http"
    RTSP = "rtsp"
    KAFKA = "kafka"
    MYSQL = "mysql"


class AppModelError(ValueError):
    pass


@dataclass(frozen=True)
class QoSClass:
    latency: Latency
    throughput: Throughput
    compute: Compute = Compute.NONE
    bandwidth_intensive: bool = False

    def label(self) -> str:
        parts = [self.latency.value, self.throughput.value]
        if self.compute is not Compute.NONE:
            parts.append(self.compute.value)
        if self.bandwidth_intensive:
            parts.append("BI")
        return ", ".join(parts)


# requests/second per vCPU
SERVICE_RATE = {Compute.HCI: 2.0, Compute.MCI: 10.0, Compute.NONE: 50.0}
# MiB; services that load ML models carry a large resident footprint
BASE_RSS = {Compute.HCI: 600.0, Compute.MCI: 600.0, Compute.NONE: 80.0}

KIB = 1024


@dataclass(frozen=True)
class MicroserviceSpec:
    id: str
    qos: QoSClass
    pattern_role: PatternRole = PatternRole.PASSTHROUGH
    protocol_tag: Protocol = Protocol.HTTP
    base_service_rate: float | None = None
    req_size: float = 2 * KIB
    resp_size: float = 2 * KIB
    base_rss: float | None = None
    vsize_factor: float = 4.0
    disk_write_per_req: float = 0.0
    pass_fraction: float = 1.0

    def __post_init__(self):
        # class-derived defaults
        if self.base_service_rate is None:
            object.__setattr__(self, "base_service_rate", SERVICE_RATE[self.qos.compute])
        if self.base_rss is None:
            object.__setattr__(self, "base_rss", BASE_RSS[self.qos.compute])
        if self.base_service_rate <= 0:
            raise AppModelError(f"{self.id}: base_service_rate must be > 0")
        if not 0.0 <= self.pass_fraction <= 1.0:
            raise AppModelError(f"{self.id}: pass_fraction must lie in [0, 1]")
        for name in ("req_size", "resp_size", "disk_write_per_req", "base_rss"):
            if getattr(self, name) < 0:
                raise AppModelError(f"{self.id}: {name} must be >= 0")
        if self.vsize_factor < 1:
            raise AppModelError(f"{self.id}: vsize_factor must be >= 1")


@dataclass(frozen=True)
class AppSpec:
    id: str
    microservices: tuple[MicroserviceSpec, ...]
    edges: tuple[tuple[str, str], ...] = ()
    entry: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "microservices", tuple(self.microservices))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        ids = [m.id for m in self.microservices]
        if len(set(ids)) != len(ids):
            raise AppModelError(f"{self.id}: duplicate microservice ids")
        if self.entry is None and ids:
            object.__setattr__(self, "entry", ids[0])
        if ids and self.entry not in ids:
            raise AppModelError(f"{self.id}: entry {self.entry!r} is not a microservice")
        for a, b in self.edges:
            if a not in ids or b not in ids:
                raise AppModelError(f"{self.id}: edge {a}->{b} names an unknown microservice")
        self.topological_order()  # raises on cycles

    @property
    def ids(self) -> list[str]:
        return [m.id for m in self.microservices]

    def get(self, ms_id: str) -> MicroserviceSpec:
        for m in self.microservices:
            if m.id == ms_id:
                return m
        raise KeyError(ms_id)

    def callees(self, ms_id: str) -> list[str]:
        return [b for a, b in self.edges if a == ms_id]

    def callers(self, ms_id: str) -> list[str]:
        return [a for a, b in self.edges if b == ms_id]

    def topological_order(self) -> list[str]:
        indeg = {m: 0 for m in self.ids}
        for _, b in self.edges:
            indeg[b] += 1
        ready = [m for m in self.ids if indeg[m] == 0]
        order = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            for callee in self.callees(node):
                indeg[callee] -= 1
                if indeg[callee] == 0:
                    ready.append(callee)
        if len(order) != len(self.ids):
            raise AppModelError(f"{self.id}: edges contain a cycle")
        return order

    def with_overrides(self, overrides: dict[str, dict]) -> "AppSpec":
        """Return a copy with per-microservice field overrides applied."""
        ms = []
        for m in self.microservices:
            if m.id in overrides:
                m = replace(m, **overrides[m.id])
            ms.append(m)
        return replace(self, microservices=tuple(ms))


def downstream_rate(app: AppSpec, entry_rate: float) -> dict[str, float]:
    """Arrival rate at every microservice when the entry receives `entry_rate` req/s.

    A chained or passthrough caller forwards `pass_fraction` of its traffic to each
    callee; an aggregator fans the full rate out to every callee.  Rates from several
    callers add up.
    """
    if entry_rate < 0:
        raise AppModelError("entry_rate must be >= 0")
    rates = {m: 0.0 for m in app.ids}
    if not rates:
        return rates
    rates[app.entry] = float(entry_rate)
    for node in app.topological_order():
        spec = app.get(node)
        share = 1.0 if spec.pattern_role is PatternRole.AGGREGATOR else spec.pass_fraction
        for callee in app.callees(node):
            rates[callee] += rates[node] * share
    return rates


def _chain(*ids: str) -> tuple[tuple[str, str], ...]:
    return tuple(zip(ids, ids[1:]))


def face_detection_recognition() -> AppSpec:
    lc_hci = dict(compute=Compute.HCI)
    return AppSpec(
        id="face_detection_recognition",
        microservices=(
            MicroserviceSpec(
                "preprocessor",
                QoSClass(Latency.LC, Throughput.HTP, bandwidth_intensive=True, **lc_hci),
                PatternRole.CHAINED,
                Protocol.RTSP,
                req_size=500 * KIB,
                resp_size=2 * KIB,
                vsize_factor=2.2,
                # decoded frames are spooled to local disk before hand-off
                disk_write_per_req=64 * KIB,
                pass_fraction=0.3,
            ),
            MicroserviceSpec(
                "face_detector",
                QoSClass(Latency.LC, Throughput.MTP, **lc_hci),
                PatternRole.CHAINED,
                # MTCNN inference costs far more per frame than resize + motion detection
                base_service_rate=0.7,
                req_size=10 * KIB,
                resp_size=2 * KIB,
                vsize_factor=5.5,
                pass_fraction=0.6,
            ),
            MicroserviceSpec(
                "face_recognizer",
                QoSClass(Latency.LC, Throughput.LTP, **lc_hci),
                PatternRole.CHAINED,
                req_size=8 * KIB,
                resp_size=2 * KIB,
                vsize_factor=3.0,
                pass_fraction=0.8,
            ),
            MicroserviceSpec(
                "database",
                QoSClass(Latency.LT, Throughput.LTP),
                PatternRole.CHAINED,
                Protocol.MYSQL,
                req_size=1 * KIB,
                resp_size=2 * KIB,
                vsize_factor=18.0,
                disk_write_per_req=4 * KIB,
            ),
        ),
        edges=_chain("preprocessor", "face_detector", "face_recognizer", "database"),
        entry="preprocessor",
    )


def predictive_maintenance() -> AppSpec:
    return AppSpec(
        id="predictive_maintenance",
        microservices=(
            MicroserviceSpec(
                "orchestrator",
                QoSClass(Latency.LC, Throughput.LTP),
                PatternRole.AGGREGATOR,
                Protocol.KAFKA,
                req_size=4 * KIB,
                resp_size=2 * KIB,
                vsize_factor=14.0,
            ),
            MicroserviceSpec(
                "emergency_event_detection",
                QoSClass(Latency.LC, Throughput.LTP, Compute.MCI),
                PatternRole.PASSTHROUGH,
                req_size=4 * KIB,
                resp_size=2 * KIB,
                vsize_factor=2.0,
            ),
            MicroserviceSpec(
                "missing_data_imputation",
                QoSClass(Latency.LC, Throughput.LTP, Compute.MCI),
                PatternRole.PASSTHROUGH,
                req_size=4 * KIB,
                resp_size=2 * KIB,
                vsize_factor=1.6,
            ),
        ),
        edges=(
            ("orchestrator", "emergency_event_detection"),
            ("orchestrator", "missing_data_imputation"),
        ),
        entry="orchestrator",
    )


def location_retrieval() -> AppSpec:
    return AppSpec(
        id="location_retrieval",
        microservices=(
            MicroserviceSpec(
                "location_service",
                QoSClass(Latency.LC, Throughput.HTP),
                PatternRole.PASSTHROUGH,
                req_size=1 * KIB,
                resp_size=2 * KIB,
                vsize_factor=20.0,
            ),
        ),
        entry="location_service",
    )


def builtin_apps() -> list[AppSpec]:
    return [face_detection_recognition(), predictive_maintenance(), location_retrieval()]


def app_registry(extra: Iterable[AppSpec] = ()) -> dict[str, AppSpec]:
    reg = {a.id: a for a in builtin_apps()}
    for a in extra:
        reg[a.id] = a
    return reg
