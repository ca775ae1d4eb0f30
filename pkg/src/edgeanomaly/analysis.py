"""Dataset quality analysis: anomaly ratio, collinearity, distribution summaries and overlap."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DatasetHandle, TraceInfo, read_trace
from .perfmodel import METRICS, TelemetryRecord

# errors_per_ns is identically zero and carries no information
ANALYZED = tuple(m for m in METRICS if m != "errors_per_ns")
PRIORITY = ("cpu_usage", "rss", "rx_bytes_per_ns", "vsize", "request_throughput", "latency_p50")
COLLINEARITY_THRESHOLD = 0.9
OVERLAP_BINS = 64
RATIO_BAND = (0.04, 0.06)
NON_TRIVIAL_OVERLAP = 0.10
# pairs expected to move together by construction
EXPECTED_GROUPS = (
    ("latency_p50", "latency_p90"),
    ("latency_p90", "latency_p99"),
    ("request_throughput", "tx_bytes_per_ns"),
    ("total_disk_write_throughput", "total_disk_read_throughput"),
    ("total_disk_write_throughput", "rx_bytes_per_ns"),
)


class AnalysisError(ValueError):
    pass


def _as_records(ds) -> list[tuple[TraceInfo, list[TelemetryRecord]]]:
    if isinstance(ds, DatasetHandle):
        return [(t, read_trace(t.path)) for t in ds.traces]
    return list(ds)


def _matrix(traces, metrics=ANALYZED) -> np.ndarray:
    rows = [r.metrics() for _, recs in traces for r in recs]
    if not rows:
        return np.empty((0, len(metrics)))
    full = np.asarray(rows, dtype=float)
    return full[:, [METRICS.index(m) for m in metrics]]


def anomaly_ratio(ds) -> float:
    """Fraction of labeled-anomalous records over all records."""
    traces = _as_records(ds)
    total = sum(len(recs) for _, recs in traces)
    if total == 0:
        raise AnalysisError("dataset is empty")
    return sum(r.label for _, recs in traces for r in recs) / total


@dataclass
class Correlation:
    metrics: tuple[str, ...]
    matrix: np.ndarray
    constant: tuple[str, ...] = ()

    def r(self, a: str, b: str) -> float:
        return float(self.matrix[self.metrics.index(a), self.metrics.index(b)])


def pearson(X: np.ndarray, metrics=ANALYZED) -> Correlation:
    """Pearson matrix of the columns of X.  A constant column has undefined correlation;
    it is reported as 0 against every other column and flagged."""
    if X.shape[0] < 2:
        raise AnalysisError("need at least 2 records for correlation")
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    scale = np.max(np.abs(X), axis=0)
    const = norms <= 1e-12 * np.maximum(scale, 1e-300) * math.sqrt(X.shape[0])
    safe = np.where(const, 1.0, norms)
    unit = centered / safe
    C = np.clip(unit.T @ unit, -1.0, 1.0)
    C[const, :] = 0.0
    C[:, const] = 0.0
    np.fill_diagonal(C, 1.0)
    C = (C + C.T) / 2
    return Correlation(tuple(metrics), C, tuple(m for m, c in zip(metrics, const) if c))


def correlation_matrix(ds) -> Correlation:
    """Pooled Pearson matrix over every record of every trace."""
    return pearson(_matrix(_as_records(ds)))


def collinear_groups(corr: Correlation, threshold: float = COLLINEARITY_THRESHOLD) -> list[list[str]]:
    """Connected components of the |r| > threshold graph, members in priority order."""
    order = _priority(corr.metrics)
    parent = {m: m for m in order}

    def find(m):
        while parent[m] != m:
            parent[m] = parent[parent[m]]
            m = parent[m]
        return m

    for i, a in enumerate(corr.metrics):
        for b in corr.metrics[i + 1 :]:
            if abs(corr.r(a, b)) > threshold:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[rb] = ra
    groups: dict[str, list[str]] = {}
    for m in order:
        groups.setdefault(find(m), []).append(m)
    return sorted(groups.values(), key=lambda g: order.index(g[0]))


def _priority(metrics) -> list[str]:
    head = [m for m in PRIORITY if m in metrics]
    return head + [m for m in metrics if m not in head]


def shortlist(corr: Correlation, threshold: float = COLLINEARITY_THRESHOLD) -> list[str]:
    """One representative per collinear group, the highest-priority member.
    Constant columns carry no signal and are left out."""
    return [g[0] for g in collinear_groups(corr, threshold) if g[0] not in corr.constant]


def overlap_coefficient(normal, anomalous, bins: int = OVERLAP_BINS) -> float:
    """Histogram overlap of two samples on their shared range: sum of min(p_i, q_i)."""
    a = np.asarray(normal, dtype=float).ravel()
    b = np.asarray(anomalous, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise AnalysisError("both samples must be non-empty")
    if bins < 1:
        raise AnalysisError("bins must be >= 1")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        return 1.0
    p, _ = np.histogram(a, bins=bins, range=(lo, hi))
    q, _ = np.histogram(b, bins=bins, range=(lo, hi))
    return float(min(1.0, np.minimum(p / a.size, q / b.size).sum()))


def five_numbers(values) -> dict[str, float]:
    x = np.asarray(values, dtype=float)
    q = np.quantile(x, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(v) for v in q)), n=int(x.size))


def trace_key(t: TraceInfo) -> str:
    return f"{t.app}/{t.microservice}"


def distribution_stats(ds, metrics=ANALYZED) -> dict[str, dict[str, dict]]:
    """Five-number summaries of every metric over label=0 records, per trace."""
    traces = _as_records(ds)
    if not any(recs for _, recs in traces):
        raise AnalysisError("dataset is empty")
    out = {}
    for t, recs in traces:
        normal = [r for r in recs if r.label == 0]
        if not normal:
            continue
        out[trace_key(t)] = {m: five_numbers([getattr(r, m) for r in normal]) for m in metrics}
    return out


def overlaps(ds, metrics=ANALYZED, bins: int = OVERLAP_BINS) -> dict[str, dict[str, float]]:
    """Normal-vs-anomalous overlap per trace and metric, for traces holding both."""
    out = {}
    for t, recs in _as_records(ds):
        normal = [r for r in recs if r.label == 0]
        anom = [r for r in recs if r.label == 1]
        if not normal or not anom:
            continue
        out[trace_key(t)] = {
            m: overlap_coefficient([getattr(r, m) for r in normal], [getattr(r, m) for r in anom], bins)
            for m in metrics
        }
    return out


@dataclass
class QualityReport:
    anomaly_ratio: float
    records: int
    anomalous_records: int
    metrics: list[str]
    corr_matrix: list[list[float]]
    constant_metrics: list[str]
    groups: list[list[str]]
    shortlist: list[str]
    distribution: dict
    overlap: dict
    verdicts: dict[str, bool]
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    def summary(self) -> str:
        lines = [
            f"records: {self.records} ({self.anomalous_records} anomalous)",
            f"anomaly ratio: {self.anomaly_ratio:.4f}",
            f"shortlist: {', '.join(self.shortlist)}",
            "collinear groups (|r| > %.2f):" % COLLINEARITY_THRESHOLD,
        ]
        lines += [f"  {' ~ '.join(g)}" for g in self.groups if len(g) > 1]
        if self.constant_metrics:
            lines.append(f"constant metrics (r reported as 0): {', '.join(self.constant_metrics)}")
        lines.append("median latency_p50 / cpu_usage on normal data:")
        for key, table in self.distribution.items():
            lines.append(f"  {key:50s} {table['latency_p50']['median']:10.2f} ms  {table['cpu_usage']['median']:.3f} vCPU")
        lines.append("verdicts:")
        lines += [f"  {k}: {'yes' if v else 'no'}" for k, v in self.verdicts.items()]
        return "\n".join(lines) + "\n"


def analyze(ds) -> QualityReport:
    traces = _as_records(ds)
    records = sum(len(recs) for _, recs in traces)
    if records == 0:
        raise AnalysisError("dataset is empty")
    anomalous = sum(r.label for _, recs in traces for r in recs)
    ratio = anomalous / records
    corr = pearson(_matrix(traces))
    groups = collinear_groups(corr)
    picked = shortlist(corr)
    ov = overlaps(traces)

    pairs = [v for table in ov.values() for m, v in table.items() if m in picked]
    non_trivial_share = float(np.mean([v > NON_TRIVIAL_OVERLAP for v in pairs])) if pairs else 0.0
    expected = {f"{a}~{b}": corr.r(a, b) for a, b in EXPECTED_GROUPS}
    verdicts = {
        "ratio_in_band": RATIO_BAND[0] <= ratio <= RATIO_BAND[1],
        "non_trivial_anomalies": non_trivial_share >= 0.5,
        "collinearity_groups_present": all(v > COLLINEARITY_THRESHOLD for v in expected.values()),
    }
    details = {
        "ratio_band": list(RATIO_BAND),
        "collinearity_threshold": COLLINEARITY_THRESHOLD,
        "overlap_bins": OVERLAP_BINS,
        "overlap_histogram": "equal-width bins on the shared range",
        "quantile_method": "linear interpolation",
        "non_trivial_overlap": NON_TRIVIAL_OVERLAP,
        "non_trivial_share": non_trivial_share,
        "expected_group_r": expected,
    }
    return QualityReport(
        anomaly_ratio=ratio,
        records=records,
        anomalous_records=int(anomalous),
        metrics=list(corr.metrics),
        corr_matrix=corr.matrix.round(6).tolist(),
        constant_metrics=list(corr.constant),
        groups=groups,
        shortlist=picked,
        distribution=distribution_stats(traces),
        overlap=ov,
        verdicts=verdicts,
        details=details,
    )


def audit_labels(ds: DatasetHandle) -> list[str]:
    """Re-derive every label from the manifest schedule; return one line per mismatch.

    A window [t, t+g) is anomalous for a microservice when a server-side event on it,
    or a client-side event while it is the entry, overlaps the window by any amount.
    """
    manifest = ds.manifest()
    problems = []
    for run in manifest["runs"]:
        g = int(run["granularity_s"])
        entry = run["entry"]
        spans: dict[str, list[tuple[int, int, str]]] = {}
        for ev in run["schedule"]:
            who = entry if ev["kind"].startswith("user_surge") else ev["target"]
            spans.setdefault(who, []).append((int(ev["start"]), int(ev["start"]) + int(ev["duration"]), ev["kind"]))
        for t in run["traces"]:
            ms = t["microservice"]
            recs = read_trace(Path(ds.root) / t["path"])
            hits = {}
            for a, b, kind in spans.get(ms, []):
                for w in range(a // g, -(-b // g)):
                    hits.setdefault(w * g, set()).add(kind)
            for r in recs:
                kinds = hits.get(r.time, set())
                want = 1 if kinds else 0
                if r.label != want:
                    problems.append(f"{run['app']}/{ms} t={r.time}: label {r.label}, schedule says {want}")
                elif want and r.anomaly_kind not in kinds:
                    problems.append(f"{run['app']}/{ms} t={r.time}: kind {r.anomaly_kind!r} not among {sorted(kinds)}")
                elif not want and r.anomaly_kind:
                    problems.append(f"{run['app']}/{ms} t={r.time}: normal record tagged {r.anomaly_kind!r}")
    return problems
