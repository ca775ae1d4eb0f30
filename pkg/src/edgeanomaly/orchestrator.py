"""Two-phase dataset generation: plan, simulate every trace, label, and persist."""

from __future__ import annotations

import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import chaos, workload
from .appmodel import AppSpec, downstream_rate
from .chaos import AnomalyEvent, build_schedule, effects_at
from .config import GenerationConfig, config_to_doc
from .dataset import DatasetHandle, TraceInfo, trace_relpath, write_manifest, write_trace
from .perfmodel import ServiceState, TelemetryRecord, window_metrics
from .topology import Placement, Topology, client_latency, default_topology, path_latency, place

log = logging.getLogger(__name__)


class CorpusError(RuntimeError):
    """Some runs of a corpus failed; the others were written."""

    def __init__(self, handles: list[DatasetHandle], errors: dict[str, Exception]):
        lines = "\n  ".join(f"{k}: {v}" for k, v in errors.items())
        super().__init__(f"{len(errors)} run(s) failed:\n  {lines}")
        self.handles = handles
        self.errors = errors


def stream(seed: int, *names: str) -> np.random.Generator:
    """Independent random stream keyed by seed and names; stable across processes."""
    key = tuple(zlib.crc32(n.encode("utf-8")) for n in names)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class RunPlan:
    config: GenerationConfig
    app: AppSpec
    topology: Topology
    placement: Placement
    schedule: list[AnomalyEvent]

    @property
    def total_windows(self) -> int:
        return self.config.total_duration // self.config.granularity

    @property
    def targets(self) -> list[str]:
        return list(self.config.target_microservices) or self.app.ids

    def service_state(self, ms_id: str) -> ServiceState:
        spec = self.app.get(ms_id)
        callers = self.app.callers(ms_id)
        if callers:
            net = path_latency(self.placement, self.topology, callers[0], ms_id)
        else:
            net = client_latency(self.placement, self.topology, ms_id)
        return ServiceState(
            allocated_vcpus=self.placement.allocated[ms_id][0],
            service_rate=spec.base_service_rate,
            base_rss=spec.base_rss,
            network_base_latency=net,
        )

    def entry_rates(self) -> np.ndarray:
        cfg = self.config
        shapes = chaos.client_shapes(self.schedule)
        rng = stream(cfg.seed, self.app.id, "workload")
        return workload.rate_series(cfg.workload, shapes, self.total_windows, cfg.granularity, rng)

    def manifest_entry(self, traces: list[TraceInfo], root: Path) -> dict:
        topo = self.topology
        return {
            "app": self.app.id,
            "entry": self.app.entry,
            "seed": self.config.seed,
            "granularity_s": self.config.granularity,
            "normal_duration_s": self.config.normal_duration,
            "anomaly_phase_duration_s": self.config.anomaly_phase_duration,
            "total_windows": self.total_windows,
            "config": config_to_doc(self.config),
            "placement": {
                **self.placement.to_dict(),
                "layers": {ms: topo.node(n).layer for ms, n in self.placement.assignments.items()},
            },
            "schedule": [e.to_dict() for e in self.schedule],
            "traces": [
                {"microservice": t.microservice, "path": t.path.relative_to(root).as_posix(), "records": t.records}
                for t in traces
            ],
        }


def plan_run(cfg: GenerationConfig) -> RunPlan:
    app = cfg.app()
    topo = cfg.topology or default_topology()
    placement = place(app, topo)
    schedule = build_schedule(cfg, stream(cfg.seed, app.id, "chaos"))
    return RunPlan(cfg, app, topo, placement, schedule)


def simulate_trace(plan: RunPlan, ms_id: str, entry_rates: np.ndarray | None = None) -> list[TelemetryRecord]:
    cfg, app = plan.config, plan.app
    if entry_rates is None:
        entry_rates = plan.entry_rates()
    spec = app.get(ms_id)
    state = plan.service_state(ms_id)
    rng = stream(cfg.seed, app.id, ms_id)
    g = cfg.granularity
    records = []
    for i, entry_rate in enumerate(entry_rates):
        t0 = i * g
        lam = downstream_rate(app, float(entry_rate))[ms_id]
        w = effects_at(plan.schedule, ms_id, t0, t0 + g, app.entry)
        rec = window_metrics(spec, state, lam, w.effects, rng, time=t0)
        if w.label:
            rec.label = 1
            rec.anomaly_kind = w.kind.value
        records.append(rec)
    return records


def _default_threads(threads: int | None) -> int:
    return max(1, threads or os.cpu_count() or 1)


def _execute(plans: list[tuple[RunPlan, Path]], threads: int | None) -> list[list[TraceInfo]]:
    """Simulate and write every (plan, microservice) trace; returns TraceInfos per plan."""
    rates = [p.entry_rates() for p, _ in plans]
    jobs = [(k, ms) for k, (p, _) in enumerate(plans) for ms in p.targets]

    def work(job):
        k, ms = job
        plan, root = plans[k]
        records = simulate_trace(plan, ms, rates[k])
        path = write_trace(records, root / trace_relpath(plan.app.id, ms), plan.config.granularity)
        log.info("wrote %s (%d records, %d anomalous)", path, len(records), sum(r.label for r in records))
        return TraceInfo(plan.app.id, ms, path, len(records))

    with ThreadPoolExecutor(max_workers=_default_threads(threads)) as pool:
        infos = list(pool.map(work, jobs))
    out: list[list[TraceInfo]] = [[] for _ in plans]
    for (k, _), info in zip(jobs, infos):
        out[k].append(info)
    return out


def run(cfg: GenerationConfig, out=None, threads: int | None = None) -> DatasetHandle:
    """Generate one application's dataset into `out` (default: the config's output dir)."""
    return run_corpus([cfg], out, threads)[0]


def run_corpus(cfgs: list[GenerationConfig], out=None, threads: int | None = None) -> list[DatasetHandle]:
    """Generate several independent runs.

    With `out` all runs share that root and one manifest; otherwise each run goes to its
    config's output dir and runs sharing a dir share its manifest.  A failing run does
    not stop the others; failures are raised together as `CorpusError` at the end.
    """
    planned: list[tuple[RunPlan, Path]] = []
    errors: dict[str, Exception] = {}
    seen_dirs = set()
    for i, cfg in enumerate(cfgs):
        name = f"run {i + 1} ({cfg.target_app})"
        try:
            root = Path(out if out is not None else cfg.output_dir)
            if (root.resolve(), cfg.target_app) in seen_dirs:
                raise ValueError(f"another run already writes {cfg.target_app} under {root}")
            plan = plan_run(cfg)
            seen_dirs.add((root.resolve(), cfg.target_app))
            planned.append((plan, root))
            log.info("%s: %d windows x %d microservice(s), %d events", name, plan.total_windows, len(plan.targets), len(plan.schedule))
        except Exception as exc:  # reported per run
            log.error("%s failed: %s", name, exc)
            errors[name] = exc

    handles: list[DatasetHandle] = []
    if planned:
        trace_lists = _execute(planned, threads)
        by_root: dict[Path, list[dict]] = {}
        for (plan, root), traces in zip(planned, trace_lists):
            by_root.setdefault(root, []).append(plan.manifest_entry(traces, root))
            handles.append(DatasetHandle(root, traces, root / "manifest.json"))
        for root, runs in by_root.items():
            write_manifest(root, runs)
    if errors:
        raise CorpusError(handles, errors)
    return handles
