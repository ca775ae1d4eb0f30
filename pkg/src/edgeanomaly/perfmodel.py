"""Per-window metric synthesis from an M/M/1 queueing model, plus a DES oracle for it."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .appmodel import MicroserviceSpec
from .chaos import ActiveEffects

NOISE_SIGMA = 0.05
T_SAT_MS = 10_000.0
MIB = 1024 * 1024
DISK_READ_RATIO = 0.25
PERCENTILES = (0.50, 0.90, 0.99)

METRICS = (
    "total_disk_read_throughput",
    "total_disk_write_throughput",
    "rss",
    "vsize",
    "cpu_usage",
    "rx_bytes_per_ns",
    "tx_bytes_per_ns",
    "latency_p50",
    "latency_p90",
    "latency_p99",
    "request_throughput",
    "errors_per_ns",
)


class UnstableQueueError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceState:
    allocated_vcpus: float
    service_rate: float
    base_rss: float
    network_base_latency: float = 0.0

    def capacity(self, cpu_hog_fraction: float = 0.0) -> float:
        return self.allocated_vcpus * self.service_rate * (1.0 - cpu_hog_fraction)


@dataclass
class TelemetryRecord:
    time: int
    total_disk_read_throughput: float
    total_disk_write_throughput: float
    rss: float
    vsize: float
    cpu_usage: float
    rx_bytes_per_ns: float
    tx_bytes_per_ns: float
    latency_p50: float
    latency_p90: float
    latency_p99: float
    request_throughput: float
    errors_per_ns: float = 0.0
    label: int = 0
    anomaly_kind: str = ""

    def metrics(self) -> tuple[float, ...]:
        return tuple(getattr(self, m) for m in METRICS)


COLUMNS = tuple(f.name for f in fields(TelemetryRecord))


def mm1_quantile(capacity: float, arrival_rate: float, q: float) -> float:
    """q-quantile of M/M/1 sojourn time in seconds; sojourn ~ Exp(C - lambda)."""
    if arrival_rate >= capacity:
        raise UnstableQueueError(f"arrival rate {arrival_rate} >= capacity {capacity}")
    return -math.log(1.0 - q) / (capacity - arrival_rate)


def mm1_percentiles(capacity: float, arrival_rate: float) -> tuple[float, float, float]:
    """Closed-form (p50, p90, p99) sojourn in milliseconds."""
    return tuple(1000.0 * mm1_quantile(capacity, arrival_rate, q) for q in PERCENTILES)


def des_oracle(mu_total: float, lam: float, n_requests: int, rng: np.random.Generator) -> tuple[float, float, float]:
    """Empirical (p50, p90, p99) sojourn in milliseconds from an event-by-event FIFO M/M/1 run."""
    if lam >= mu_total:
        raise UnstableQueueError(f"arrival rate {lam} >= service rate {mu_total}")
    if lam <= 0:
        raise ValueError("arrival rate must be > 0")
    gaps = rng.exponential(1.0 / lam, n_requests).tolist()
    services = rng.exponential(1.0 / mu_total, n_requests).tolist()
    sojourn = [0.0] * n_requests
    arrival = 0.0
    server_free = 0.0
    for i in range(n_requests):
        arrival += gaps[i]
        start = arrival if arrival > server_free else server_free
        server_free = start + services[i]
        sojourn[i] = server_free - arrival
    p = np.percentile(np.asarray(sojourn), [100 * q for q in PERCENTILES])
    return tuple(1000.0 * float(x) for x in p)


def _noise(rng: np.random.Generator | None) -> float:
    return 1.0 if rng is None else math.exp(NOISE_SIGMA * rng.standard_normal())


def window_metrics(
    ms: MicroserviceSpec,
    state: ServiceState,
    lam: float,
    effects: ActiveEffects = ActiveEffects(),
    rng: np.random.Generator | None = None,
    time: int = 0,
) -> TelemetryRecord:
    """Synthesize one unlabeled window of the 12 monitored metrics.

    `rng=None` switches measurement noise off.
    """
    if lam < 0:
        raise ValueError("arrival rate must be >= 0")
    hog = effects.cpu_hog_fraction
    cap = state.capacity(hog)
    rho = lam / cap if cap > 0 else math.inf
    throughput = min(lam, cap)

    network_ms = 2.0 * (state.network_base_latency + effects.net_delay_add)
    if rho < 1:
        # floor the rate gap so p99 stays <= T_sat while p50:p90:p99 keep their ratios
        gap = max(cap - lam, -math.log(1.0 - PERCENTILES[-1]) / (T_SAT_MS / 1000.0))
        queue = [1000.0 * -math.log(1.0 - q) / gap for q in PERCENTILES]
    else:
        queue = [T_SAT_MS] * 3
    latencies = [x + network_ms for x in queue]

    v = state.allocated_vcpus
    cpu = min(v, (min(rho, 1.0) + hog) * v)
    rss = (state.base_rss + effects.mem_stress_mib) * MIB
    disk_write = throughput * ms.disk_write_per_req

    n = lambda: _noise(rng)  # noqa: E731
    latencies = sorted(x * n() for x in latencies)
    return TelemetryRecord(
        time=time,
        total_disk_read_throughput=DISK_READ_RATIO * disk_write * n(),
        total_disk_write_throughput=disk_write * n(),
        rss=rss * n(),
        vsize=rss * ms.vsize_factor * n(),
        cpu_usage=min(v, cpu * n()),
        rx_bytes_per_ns=lam * ms.req_size / 1e9 * n(),
        tx_bytes_per_ns=throughput * ms.resp_size / 1e9 * n(),
        latency_p50=latencies[0],
        latency_p90=latencies[1],
        latency_p99=latencies[2],
        request_throughput=throughput * n(),
    )
