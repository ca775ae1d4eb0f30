"""Dataset-generation configuration: schema, YAML-subset parsing, validation, canonical dump."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any

import yaml

from .appmodel import (
    AppModelError,
    AppSpec,
    Compute,
    Latency,
    MicroserviceSpec,
    PatternRole,
    Protocol,
    QoSClass,
    Throughput,
    app_registry,
)
from .topology import LAYERS, Link, Node, Topology
from .workload import SPIKE_DURATION, SPIKE_FACTOR, STEP_FACTOR, WorkloadProfile

DEFAULT_GRANULARITY = 10


class AnomalyKind(str, Enum):
    CPU_HOG = "cpu_hog"
    MEMORY_STRESS = "memory_stress"
    NETWORK_DELAY = "network_delay"
    USER_SURGE_SPIKE = "user_surge_spike"
    USER_SURGE_STEP = "user_surge_step"

    @property
    def side(self) -> str:
        return "client" if self in (AnomalyKind.USER_SURGE_SPIKE, AnomalyKind.USER_SURGE_STEP) else "server"


DEFAULT_MAGNITUDE = {
    AnomalyKind.CPU_HOG: 0.5,
    AnomalyKind.MEMORY_STRESS: 0.5,
    AnomalyKind.NETWORK_DELAY: 1.0,
    AnomalyKind.USER_SURGE_SPIKE: SPIKE_FACTOR,
    AnomalyKind.USER_SURGE_STEP: STEP_FACTOR,
}
DEFAULT_EVENTS = 3
DEFAULT_EVENT_DURATION = {AnomalyKind.USER_SURGE_SPIKE: int(SPIKE_DURATION)}
DEFAULT_EVENT_DURATION_OTHER = 100

# entry workload defaults per built-in application
DEFAULT_PROFILES = {
    "face_detection_recognition": WorkloadProfile(1.2, 0.1, 3600.0, 0.25),
    "predictive_maintenance": WorkloadProfile(0.5, 0.3, 3600.0),
    "location_retrieval": WorkloadProfile(12.0, 0.3, 3600.0),
}
FALLBACK_PROFILE = WorkloadProfile(1.0, 0.0, 3600.0)


class ConfigError(ValueError):
    def __init__(self, message: str, findings: list["Finding"] | None = None):
        super().__init__(message)
        self.findings = findings or []


@dataclass(frozen=True)
class Finding:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class AnomalySpec:
    kind: AnomalyKind
    target: str
    event_duration: int
    event_count: int = DEFAULT_EVENTS
    magnitude: float = 0.0

    @property
    def side(self) -> str:
        return self.kind.side


@dataclass(frozen=True)
class GenerationConfig:
    target_app: str
    normal_duration: int
    anomaly_phase_duration: int = 0
    granularity: int = DEFAULT_GRANULARITY
    seed: int = 0
    target_microservices: tuple[str, ...] = ()
    workload: WorkloadProfile = FALLBACK_PROFILE
    anomalies: tuple[AnomalySpec, ...] = ()
    output_dir: str = "dataset"
    apps: tuple[AppSpec, ...] = ()
    topology: Topology | None = None

    @property
    def total_duration(self) -> int:
        return self.normal_duration + self.anomaly_phase_duration

    def registry(self) -> dict[str, AppSpec]:
        return app_registry(self.apps)

    def app(self) -> AppSpec:
        try:
            return self.registry()[self.target_app]
        except KeyError:
            raise ConfigError(f"unknown application {self.target_app!r}") from None


# ---------------------------------------------------------------------------
# validation


def validate_config(cfg: GenerationConfig, app: AppSpec) -> list[Finding]:
    out: list[Finding] = []
    g = cfg.granularity
    if g <= 0:
        out.append(Finding("bad_granularity", f"granularity must be > 0, got {g}"))
    if cfg.normal_duration <= 0:
        out.append(Finding("bad_duration", f"normal duration must be > 0, got {cfg.normal_duration}"))
    if cfg.anomaly_phase_duration < 0:
        out.append(Finding("bad_duration", f"anomaly phase duration must be >= 0, got {cfg.anomaly_phase_duration}"))
    if g > 0:
        for name, value in (("normal", cfg.normal_duration), ("anomaly phase", cfg.anomaly_phase_duration)):
            if value % g:
                out.append(Finding("not_multiple", f"{name} duration {value}s is not a multiple of granularity {g}s"))
    if cfg.target_app != app.id:
        out.append(Finding("app_mismatch", f"config targets {cfg.target_app!r} but was checked against {app.id!r}"))
    for ms in cfg.target_microservices:
        if ms not in app.ids:
            out.append(Finding("unknown_microservice", f"{ms!r} is not a microservice of {app.id}"))

    seen = set()
    for i, a in enumerate(cfg.anomalies):
        where = f"anomaly #{i + 1} ({a.kind.value} on {a.target})"
        if a.target not in app.ids:
            out.append(Finding("unresolved_target", f"{where}: {a.target!r} is not a microservice of {app.id}"))
        elif a.side == "client" and a.target != app.entry:
            out.append(Finding("client_target", f"{where}: client-side anomalies must target the entry {app.entry!r}"))
        if (a.target, a.kind) in seen:
            out.append(Finding("duplicate_anomaly", f"{where}: kind already scheduled for this target"))
        seen.add((a.target, a.kind))
        if a.event_count < 1:
            out.append(Finding("bad_events", f"{where}: events must be >= 1"))
        if a.event_duration <= 0:
            out.append(Finding("bad_event_duration", f"{where}: duration must be > 0"))
        elif a.event_count * a.event_duration > cfg.anomaly_phase_duration:
            out.append(
                Finding(
                    "schedule_overflow",
                    f"{where}: {a.event_count} x {a.event_duration}s exceeds anomaly phase of {cfg.anomaly_phase_duration}s",
                )
            )
        bad = _magnitude_problem(a.kind, a.magnitude)
        if bad:
            out.append(Finding("bad_magnitude", f"{where}: {bad}"))
    return out


def _magnitude_problem(kind: AnomalyKind, m: float) -> str | None:
    if kind is AnomalyKind.CPU_HOG and not 0 < m < 1:
        return "cpu_hog magnitude is a CPU fraction in (0, 1)"
    if kind in (AnomalyKind.MEMORY_STRESS, AnomalyKind.NETWORK_DELAY) and m <= 0:
        return f"{kind.value} magnitude must be > 0"
    if kind.side == "client" and m <= 1:
        return "surge factor must be > 1"
    return None


# ---------------------------------------------------------------------------
# parsing

_TOP_KEYS = {"app", "microservices", "normal", "anomalies", "output", "seed", "granularity_s", "topology", "apps"}
_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(s|m|h)?\s*$")
_UNIT = {None: 1, "s": 1, "m": 60, "h": 3600}


def _load_subset(text: str) -> Any:
    try:
        for event in yaml.parse(text, Loader=yaml.SafeLoader):
            if isinstance(event, yaml.AliasEvent) or getattr(event, "anchor", None):
                mark = event.start_mark
                raise ConfigError(f"line {mark.line + 1}, column {mark.column + 1}: anchors and aliases are not supported")
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        pos = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        raise ConfigError(f"syntax error: {pos}{exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"syntax error: {exc}") from None


def parse_duration(value: Any, what: str) -> int:
    """Seconds from an int or a string such as ``"3h"``, ``"90m"``, ``"600s"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{what}: expected a duration, got {value!r}")
    if isinstance(value, (int, float)):
        seconds = float(value)
    elif isinstance(value, str) and (m := _DURATION_RE.match(value)):
        seconds = float(m.group(1)) * _UNIT[m.group(2)]
    else:
        raise ConfigError(f"{what}: expected a duration, got {value!r}")
    if seconds != int(seconds):
        raise ConfigError(f"{what}: durations must be whole seconds, got {value!r}")
    return int(seconds)


def _mapping(obj: Any, what: str, allowed: set[str]) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{what}: expected a mapping")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{what}: unknown key(s) {sorted(map(str, unknown))}")
    return obj


def _number(obj: dict, key: str, what: str, default: float | None = None) -> float:
    if key not in obj:
        if default is None:
            raise ConfigError(f"{what}: missing {key!r}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{what}.{key}: expected a number, got {v!r}")
    return float(v)


def _seed(v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ConfigError(f"seed: expected an unsigned integer, got {v!r}")
    return v


def _parse_anomaly(entry: Any, i: int) -> AnomalySpec:
    what = f"anomalies.inject[{i}]"
    entry = _mapping(entry, what, {"kind", "target", "events", "duration_s", "magnitude"})
    try:
        kind = AnomalyKind(entry.get("kind"))
    except ValueError:
        choices = ", ".join(k.value for k in AnomalyKind)
        raise ConfigError(f"{what}: unknown anomaly kind {entry.get('kind')!r} (expected one of {choices})") from None
    if not isinstance(entry.get("target"), str):
        raise ConfigError(f"{what}: missing target microservice")
    events = entry.get("events", DEFAULT_EVENTS)
    if isinstance(events, bool) or not isinstance(events, int):
        raise ConfigError(f"{what}.events: expected an integer, got {events!r}")
    default_dur = DEFAULT_EVENT_DURATION.get(kind, DEFAULT_EVENT_DURATION_OTHER)
    duration = parse_duration(entry.get("duration_s", default_dur), f"{what}.duration_s")
    magnitude = _number(entry, "magnitude", what, DEFAULT_MAGNITUDE[kind])
    return AnomalySpec(kind, entry["target"], duration, events, magnitude)


def _parse_topology(obj: Any) -> Topology:
    obj = _mapping(obj, "topology", {"nodes", "links", "same_layer_latency_ms"})
    nodes, links = [], []
    try:
        for n in obj.get("nodes") or []:
            n = _mapping(n, "topology.nodes[]", {"id", "layer", "vcpus", "memory_gib", "deployable"})
            nodes.append(Node(str(n["id"]), n["layer"], float(n["vcpus"]), float(n["memory_gib"]), bool(n.get("deployable", True))))
        for l in obj.get("links") or []:
            l = _mapping(l, "topology.links[]", {"from", "to", "latency_ms", "bandwidth_gbps"})
            links.append(Link(l["from"], l["to"], float(l["latency_ms"]), float(l["bandwidth_gbps"])))
        topo = Topology(tuple(nodes), tuple(links), float(obj.get("same_layer_latency_ms", 2.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"topology: {exc}") from None
    used = sorted({LAYERS.index(n.layer) for n in topo.nodes})
    for k in range(used[0], used[-1]) if used else ():
        try:
            topo._hop(LAYERS[k], LAYERS[k + 1])
        except KeyError as exc:
            raise ConfigError(f"topology: {exc.args[0]}") from None
    return topo


_MS_KEYS = {
    "id", "latency", "throughput", "compute", "bandwidth_intensive", "pattern", "protocol",
    "service_rate", "req_size", "resp_size", "base_rss_mib", "vsize_factor", "disk_write_per_req", "pass_fraction",
}
_MS_FIELD = {
    "service_rate": "base_service_rate",
    "req_size": "req_size",
    "resp_size": "resp_size",
    "base_rss_mib": "base_rss",
    "vsize_factor": "vsize_factor",
    "disk_write_per_req": "disk_write_per_req",
    "pass_fraction": "pass_fraction",
}


def _parse_app(obj: Any) -> AppSpec:
    obj = _mapping(obj, "apps[]", {"id", "entry", "edges", "microservices"})
    try:
        ms = []
        for m in obj.get("microservices") or []:
            m = _mapping(m, "apps[].microservices[]", _MS_KEYS)
            qos = QoSClass(
                Latency(m.get("latency", "LC")),
                Throughput(m.get("throughput", "LTp")),
                Compute(m.get("compute", "none")),
                bool(m.get("bandwidth_intensive", False)),
            )
            extra = {_MS_FIELD[k]: float(m[k]) for k in _MS_FIELD if k in m}
            ms.append(
                MicroserviceSpec(
                    str(m["id"]), qos, PatternRole(m.get("pattern", "passthrough")), Protocol(m.get("protocol", "http")), **extra
                )
            )
        edges = tuple((str(a), str(b)) for a, b in obj.get("edges") or [])
        return AppSpec(str(obj["id"]), tuple(ms), edges, obj.get("entry"))
    except (KeyError, TypeError, ValueError, AppModelError) as exc:
        raise ConfigError(f"apps: {exc}") from None


def parse_config(text: str, default_seed: int | None = None) -> GenerationConfig:
    """Parse, default-fill and validate a configuration document.

    `default_seed` is used only when the document carries no ``seed``.
    """
    doc = _load_subset(text)
    doc = _mapping(doc, "config", _TOP_KEYS)
    if "app" not in doc or not isinstance(doc["app"], str):
        raise ConfigError("config: missing 'app'")

    apps = tuple(_parse_app(a) for a in doc.get("apps") or [])
    topo = _parse_topology(doc["topology"]) if doc.get("topology") is not None else None

    granularity = parse_duration(doc.get("granularity_s", DEFAULT_GRANULARITY), "granularity_s")
    normal = _mapping(doc.get("normal"), "normal", {"duration_s", "workload"})
    if "duration_s" not in normal:
        raise ConfigError("normal: missing 'duration_s'")
    normal_duration = parse_duration(normal["duration_s"], "normal.duration_s")

    base = DEFAULT_PROFILES.get(doc["app"], FALLBACK_PROFILE)
    wl = _mapping(normal.get("workload"), "normal.workload", {"base_rate", "diurnal_amplitude", "diurnal_period_s", "jitter_sigma"})
    try:
        profile = WorkloadProfile(
            _number(wl, "base_rate", "normal.workload", base.base_rate),
            _number(wl, "diurnal_amplitude", "normal.workload", base.diurnal_amplitude),
            float(parse_duration(wl.get("diurnal_period_s", base.diurnal_period), "normal.workload.diurnal_period_s")),
            _number(wl, "jitter_sigma", "normal.workload", base.jitter_sigma),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"normal.workload: {exc}") from None

    anomalies_doc = _mapping(doc.get("anomalies"), "anomalies", {"duration_s", "inject"})
    phase = parse_duration(anomalies_doc.get("duration_s", 0), "anomalies.duration_s")
    inject = anomalies_doc.get("inject") or []
    if not isinstance(inject, list):
        raise ConfigError("anomalies.inject: expected a sequence")
    specs = tuple(_parse_anomaly(e, i) for i, e in enumerate(inject))

    targets = doc.get("microservices") or []
    if isinstance(targets, str):
        targets = [targets]
    if not isinstance(targets, list) or not all(isinstance(t, str) for t in targets):
        raise ConfigError("microservices: expected a list of microservice ids")

    if "seed" in doc:
        seed = _seed(doc["seed"])
    else:
        seed = _seed(default_seed if default_seed is not None else 0)
    output = doc.get("output", "dataset")
    if not isinstance(output, str):
        raise ConfigError("output: expected a path")

    cfg = GenerationConfig(
        target_app=doc["app"],
        normal_duration=normal_duration,
        anomaly_phase_duration=phase,
        granularity=granularity,
        seed=seed,
        target_microservices=tuple(targets),
        workload=profile,
        anomalies=specs,
        output_dir=output,
        apps=apps,
        topology=topo,
    )
    findings = validate_config(cfg, cfg.app())
    if findings:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(map(str, findings)), findings)
    return cfg


def load_config(path, default_seed: int | None = None) -> GenerationConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), default_seed)


# ---------------------------------------------------------------------------
# canonical serialization


def _num(x: float):
    return int(x) if float(x).is_integer() else float(x)


def _app_to_doc(app: AppSpec) -> dict:
    ms = []
    for m in app.microservices:
        d = {
            "id": m.id,
            "latency": m.qos.latency.value,
            "throughput": m.qos.throughput.value,
            "compute": m.qos.compute.value,
            "bandwidth_intensive": m.qos.bandwidth_intensive,
            "pattern": m.pattern_role.value,
            "protocol": m.protocol_tag.value,
        }
        for key, attr in _MS_FIELD.items():
            d[key] = _num(getattr(m, attr))
        ms.append(d)
    return {"id": app.id, "entry": app.entry, "edges": [list(e) for e in app.edges], "microservices": ms}


def config_to_doc(cfg: GenerationConfig) -> dict:
    doc: dict[str, Any] = {
        "app": cfg.target_app,
        "microservices": list(cfg.target_microservices),
        "granularity_s": cfg.granularity,
        "seed": cfg.seed,
        "normal": {
            "duration_s": cfg.normal_duration,
            "workload": {
                "base_rate": _num(cfg.workload.base_rate),
                "diurnal_amplitude": _num(cfg.workload.diurnal_amplitude),
                "diurnal_period_s": int(cfg.workload.diurnal_period),
                "jitter_sigma": _num(cfg.workload.jitter_sigma),
            },
        },
        "anomalies": {
            "duration_s": cfg.anomaly_phase_duration,
            "inject": [
                {
                    "kind": a.kind.value,
                    "target": a.target,
                    "events": a.event_count,
                    "duration_s": a.event_duration,
                    "magnitude": _num(a.magnitude),
                }
                for a in cfg.anomalies
            ],
        },
        "output": cfg.output_dir,
    }
    if cfg.apps:
        doc["apps"] = [_app_to_doc(a) for a in cfg.apps]
    if cfg.topology is not None:
        t = cfg.topology
        doc["topology"] = {
            "same_layer_latency_ms": _num(t.same_layer_latency),
            "nodes": [
                {"id": n.id, "layer": n.layer, "vcpus": _num(n.vcpus), "memory_gib": _num(n.memory), "deployable": n.deployable}
                for n in t.nodes
            ],
            "links": [
                {"from": l.from_layer, "to": l.to_layer, "latency_ms": _num(l.latency), "bandwidth_gbps": _num(l.bandwidth)}
                for l in t.links
            ],
        }
    return doc


def dump_config(cfg: GenerationConfig) -> str:
    """Canonical text form; ``dump_config(parse_config(dump_config(c))) == dump_config(c)``."""
    return yaml.safe_dump(config_to_doc(cfg), sort_keys=False, default_flow_style=False)


def with_seed(cfg: GenerationConfig, seed: int) -> GenerationConfig:
    return replace(cfg, seed=_seed(seed))


# ---------------------------------------------------------------------------
# bundled configurations

BUILTIN_CONFIGS = ("location_retrieval", "face_detection_recognition", "predictive_maintenance")


def builtin_config_text(name: str) -> str:
    from importlib import resources

    if name not in BUILTIN_CONFIGS:
        raise ConfigError(f"no bundled config {name!r}; choose from {', '.join(BUILTIN_CONFIGS)}")
    return (resources.files(__package__) / "configs" / f"{name}.yaml").read_text(encoding="utf-8")


def default_corpus(default_seed: int | None = None) -> list[GenerationConfig]:
    """The three bundled application runs."""
    return [parse_config(builtin_config_text(n), default_seed) for n in BUILTIN_CONFIGS]
