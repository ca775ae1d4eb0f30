"""On-disk format for labeled traces (CSV) and run manifests (JSON)."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .config import AnomalyKind
from .perfmodel import COLUMNS, METRICS, TelemetryRecord

MANIFEST = "manifest.json"
UNITS = {
    "time": "s since run start",
    "total_disk_read_throughput": "bytes/s",
    "total_disk_write_throughput": "bytes/s",
    "rss": "bytes",
    "vsize": "bytes",
    "cpu_usage": "vCPU (0..allocated vCPUs)",
    "rx_bytes_per_ns": "bytes/ns",
    "tx_bytes_per_ns": "bytes/ns",
    "latency_p50": "ms",
    "latency_p90": "ms",
    "latency_p99": "ms",
    "request_throughput": "req/s",
    "errors_per_ns": "errors/ns",
}
_KINDS = {"", *(k.value for k in AnomalyKind)}


class DatasetError(ValueError):
    pass


def _fmt(x: float) -> str:
    return "%.6g" % x


def format_row(r: TelemetryRecord) -> list[str]:
    return [str(int(r.time))] + [_fmt(getattr(r, m)) for m in METRICS] + [str(int(r.label)), r.anomaly_kind]


def write_trace(records: Sequence[TelemetryRecord], path, granularity: int | None = None) -> Path:
    """Write one trace as CSV.  Records must be time-ordered and, if `granularity` is
    given, spaced exactly that far apart."""
    for prev, cur in zip(records, records[1:]):
        if cur.time <= prev.time:
            raise DatasetError(f"records are not time-ordered at t={cur.time}")
        if granularity is not None and cur.time - prev.time != granularity:
            raise DatasetError(f"gap of {cur.time - prev.time}s at t={cur.time}, expected {granularity}s")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow(format_row(r))
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(buf.getvalue(), encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_trace(path) -> list[TelemetryRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise DatasetError(f"{path}: header mismatch, expected {len(COLUMNS)} columns {','.join(COLUMNS)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            out.append(_parse_row(row, f"{path}:{lineno}"))
    return out


def _parse_row(row: list[str], where: str) -> TelemetryRecord:
    if len(row) != len(COLUMNS):
        raise DatasetError(f"{where}: malformed row, expected {len(COLUMNS)} fields, got {len(row)}")
    try:
        time = int(row[0])
        values = [float(x) for x in row[1 : 1 + len(METRICS)]]
        label = int(row[-2])
    except ValueError as exc:
        raise DatasetError(f"{where}: malformed row: {exc}") from None
    for name, v in zip(METRICS, values):
        if not v >= 0:  # also rejects NaN
            raise DatasetError(f"{where}: malformed row: {name}={v} must be >= 0")
    if time < 0:
        raise DatasetError(f"{where}: malformed row: negative time")
    if label not in (0, 1):
        raise DatasetError(f"{where}: malformed row: label must be 0 or 1")
    kind = row[-1]
    if kind not in _KINDS:
        raise DatasetError(f"{where}: malformed row: unknown anomaly kind {kind!r}")
    return TelemetryRecord(time, *values, label=label, anomaly_kind=kind)


@dataclass(frozen=True)
class TraceInfo:
    app: str
    microservice: str
    path: Path
    records: int


@dataclass
class DatasetHandle:
    root: Path
    traces: list[TraceInfo] = field(default_factory=list)
    manifest_path: Path | None = None

    def read(self, trace: TraceInfo) -> list[TelemetryRecord]:
        return read_trace(trace.path)

    def manifest(self) -> dict:
        return load_manifest(self.root)

    @classmethod
    def load(cls, root) -> "DatasetHandle":
        """Open a dataset directory and check every listed trace against its manifest."""
        root = Path(root)
        manifest = load_manifest(root)
        traces = []
        for run in manifest["runs"]:
            for t in run["traces"]:
                info = TraceInfo(run["app"], t["microservice"], root / t["path"], int(t["records"]))
                if not info.path.exists():
                    raise DatasetError(f"listed trace {info.path} is missing")
                traces.append(info)
        return cls(root, traces, root / MANIFEST)

    def verify(self) -> None:
        for t in self.traces:
            n = len(read_trace(t.path))
            if n != t.records:
                raise DatasetError(f"{t.path}: manifest says {t.records} records, file has {n}")


def trace_relpath(app: str, microservice: str) -> str:
    return f"{app}/{microservice}.csv"


def write_manifest(root, runs: Iterable[dict]) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    doc = {"tool": "edgeanomaly", "version": __version__, "units": UNITS, "runs": list(runs)}
    path = root / MANIFEST
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def load_manifest(root) -> dict:
    path = Path(root) / MANIFEST
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DatasetError(f"no {MANIFEST} in {root}") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("runs"), list):
        raise DatasetError(f"{path}: missing 'runs'")
    return doc
