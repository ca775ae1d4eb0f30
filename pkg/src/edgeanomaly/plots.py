"""SVG figures for a QualityReport.  Needs matplotlib (the `plots` extra)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .analysis import OVERLAP_BINS, QualityReport, _as_records, trace_key


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("plotting needs matplotlib; install the 'plots' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    return path


def render(report: QualityReport, ds, out) -> list[Path]:
    """Write heatmap, box plots, PDF overlays and label timelines into `out`."""
    plt = _pyplot()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    traces = _as_records(ds)
    written = []

    C = np.asarray(report.corr_matrix)
    fig, ax = plt.subplots(figsize=(8, 7))
    im = ax.imshow(C, vmin=-1, vmax=1, cmap="coolwarm")
    ax.set_xticks(range(len(report.metrics)), report.metrics, rotation=90)
    ax.set_yticks(range(len(report.metrics)), report.metrics)
    fig.colorbar(im, ax=ax)
    written.append(_save(fig, out / "correlation.svg"))
    plt.close(fig)

    metrics = report.shortlist
    fig, axes = plt.subplots(len(metrics), 1, figsize=(10, 2.6 * len(metrics)), squeeze=False)
    for ax, m in zip(axes[:, 0], metrics):
        keys, data = [], []
        for t, recs in traces:
            vals = [getattr(r, m) for r in recs if r.label == 0]
            if vals:
                keys.append(t.microservice)
                data.append(vals)
        ax.boxplot(data, showfliers=False)
        ax.set_xticks(range(1, len(keys) + 1), keys, rotation=30, fontsize=7)
        ax.set_ylabel(m, fontsize=8)
    fig.tight_layout()
    written.append(_save(fig, out / "distributions.svg"))
    plt.close(fig)

    for t, recs in traces:
        if not any(r.label for r in recs):
            continue
        name = trace_key(t).replace("/", "__")
        fig, axes = plt.subplots(1, len(metrics), figsize=(3 * len(metrics), 2.6), squeeze=False)
        for ax, m in zip(axes[0], metrics):
            normal = [getattr(r, m) for r in recs if r.label == 0]
            anom = [getattr(r, m) for r in recs if r.label == 1]
            lo, hi = min(normal + anom), max(normal + anom)
            rng = (lo, hi) if hi > lo else (lo - 0.5, hi + 0.5)
            ax.hist(normal, bins=OVERLAP_BINS, range=rng, density=True, alpha=0.5, label="normal")
            ax.hist(anom, bins=OVERLAP_BINS, range=rng, density=True, alpha=0.5, label="anomalous")
            ax.set_title(m, fontsize=8)
        axes[0][0].legend(fontsize=7)
        fig.tight_layout()
        written.append(_save(fig, out / f"overlap__{name}.svg"))
        plt.close(fig)

        fig, ax = plt.subplots(figsize=(12, 2.8))
        times = np.array([r.time for r in recs])
        ax.plot(times, [r.latency_p90 for r in recs], lw=0.6)
        ax.fill_between(times, 0, 1, where=[r.label == 1 for r in recs], color="red", alpha=0.3,
                        transform=ax.get_xaxis_transform(), step="post")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("latency_p90 (ms)")
        ax.set_title(trace_key(t), fontsize=9)
        written.append(_save(fig, out / f"timeline__{name}.svg"))
        plt.close(fig)
    return written
