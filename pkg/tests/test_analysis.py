import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeanomaly.analysis import (
    ANALYZED,
    AnalysisError,
    analyze,
    anomaly_ratio,
    audit_labels,
    collinear_groups,
    correlation_matrix,
    distribution_stats,
    five_numbers,
    overlap_coefficient,
    pearson,
    shortlist,
)
from edgeanomaly.dataset import DatasetHandle, TraceInfo, write_manifest
from edgeanomaly.perfmodel import TelemetryRecord


def traces_of(*label_lists):
    out = []
    for i, labels in enumerate(label_lists):
        recs = [TelemetryRecord(10 * k, *([1.0 + k] * 11), 0.0, lab, "cpu_hog" if lab else "") for k, lab in enumerate(labels)]
        out.append((TraceInfo("app", f"m{i}", None, len(recs)), recs))
    return out


def test_ratio_reference_figures():
    assert 1512 / 30240 == 0.05
    assert anomaly_ratio(traces_of([1] * 1512 + [0] * (30240 - 1512))) == 0.05


def test_ratio_all_normal_and_empty():
    assert anomaly_ratio(traces_of([0] * 10, [0] * 5)) == 0
    with pytest.raises(AnalysisError):
        anomaly_ratio([])


def test_duplicated_column_r_one():
    x = np.random.default_rng(0).normal(size=(100, 1))
    c = pearson(np.hstack([x, x]), ("a", "b"))
    assert c.r("a", "b") == pytest.approx(1.0)


def test_independent_noise_small_r():
    X = np.random.default_rng(1).normal(size=(10_000, 2))
    assert abs(pearson(X, ("a", "b")).r("a", "b")) < 0.05


def test_constant_column_flagged():
    X = np.column_stack([np.arange(10.0), np.full(10, 3.0), np.arange(10.0) ** 2])
    c = pearson(X, ("a", "k", "b"))
    assert c.constant == ("k",)
    assert c.r("a", "k") == 0 and c.r("k", "k") == 1
    assert c.r("a", "b") == pytest.approx(np.corrcoef(X[:, 0], X[:, 2])[0, 1])


def test_too_few_records():
    with pytest.raises(AnalysisError):
        pearson(np.ones((1, 3)), ("a", "b", "c"))


def test_shortlist_priority_and_transitivity():
    rng = np.random.default_rng(2)
    base = rng.normal(size=500)
    other = rng.normal(size=500)
    cols = {m: rng.normal(size=500) for m in ANALYZED}
    # chain latency_p99 ~ cpu_usage ~ latency_p50 so all three collapse to cpu_usage
    cols["latency_p99"] = base
    cols["cpu_usage"] = base + 0.05 * rng.normal(size=500)
    cols["latency_p50"] = cols["cpu_usage"] + 0.05 * rng.normal(size=500)
    cols["vsize"] = other
    cols["latency_p90"] = other
    X = np.column_stack([cols[m] for m in ANALYZED])
    corr = pearson(X)
    picked = shortlist(corr)
    assert "latency_p50" not in picked and "latency_p99" not in picked and "cpu_usage" in picked
    assert "vsize" in picked and "latency_p90" not in picked
    assert picked[:2] == ["cpu_usage", "rss"]
    group = next(g for g in collinear_groups(corr) if "cpu_usage" in g)
    assert group[0] == "cpu_usage" and set(group) >= {"latency_p50", "latency_p99"}


def test_overlap_trivial_cases():
    x = np.random.default_rng(3).normal(size=1000)
    assert overlap_coefficient(x, x) == pytest.approx(1.0)
    assert overlap_coefficient([0, 1, 2], [10, 11]) == 0.0
    assert overlap_coefficient([5, 5], [5]) == 1.0
    with pytest.raises(AnalysisError):
        overlap_coefficient([], [1])


def _gaussian_overlap_oracle(delta, n=200_001, span=12.0):
    # trapezoid integral of min(phi(x), phi(x - delta))
    xs = np.linspace(-span, span + delta, n)
    phi = lambda z: np.exp(-z * z / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(np.minimum(phi(xs), phi(xs - delta)), xs))


def test_gaussian_overlap():
    oracle = _gaussian_overlap_oracle(0.5)
    assert oracle == pytest.approx(0.8026, abs=1e-4)
    rng = np.random.default_rng(4)
    got = overlap_coefficient(rng.normal(0, 1, 100_000), rng.normal(0.5, 1, 100_000), 64)
    assert got == pytest.approx(0.80, abs=0.02)
    assert got == pytest.approx(oracle, abs=0.02)


def test_quantiles_linear():
    s = five_numbers(range(1, 101))
    assert (s["min"], s["q1"], s["median"], s["q3"], s["max"]) == (1, 25.75, 50.5, 75.25, 100)
    c = five_numbers([7.0] * 9)
    assert {c[k] for k in ("min", "q1", "median", "q3", "max")} == {7.0}


def test_distribution_uses_normal_records_only():
    tr = traces_of([0, 0, 1, 1])
    stats = distribution_stats(tr)["app/m0"]["cpu_usage"]
    assert (stats["min"], stats["max"], stats["n"]) == (1.0, 2.0, 2)


def test_corpus_report(corpus_dir, tmp_path):
    ds = DatasetHandle.load(corpus_dir)
    report = analyze(ds)
    assert 0.04 <= report.anomaly_ratio <= 0.06
    assert report.anomaly_ratio == anomaly_ratio(ds)
    C = np.array(report.corr_matrix)
    assert C.shape == (11, 11) and np.allclose(C, C.T) and np.allclose(np.diag(C), 1)
    assert (np.abs(C) <= 1).all()
    assert correlation_matrix(ds).r("latency_p50", "latency_p90") > 0.9
    dist = report.distribution
    assert dist["face_detection_recognition/preprocessor"]["latency_p50"]["median"] > \
        dist["location_retrieval/location_service"]["latency_p50"]["median"]
    assert all(0 <= v <= 1 for t in report.overlap.values() for v in t.values())
    assert all(report.verdicts.values())
    doc = json.loads(report.write(tmp_path / "r.json").read_text())
    assert doc["anomaly_ratio"] == report.anomaly_ratio
    assert "shortlist:" in report.summary()


def test_audit_clean_corpus(corpus_dir):
    assert audit_labels(DatasetHandle.load(corpus_dir)) == []


def test_audit_catches_flipped_label(location_cfg, tmp_path):
    from edgeanomaly.orchestrator import run

    h = run(location_cfg, tmp_path)
    path = h.traces[0].path
    lines = path.read_text().splitlines()
    cells = lines[5].split(",")
    cells[-2], cells[-1] = "1", "cpu_hog"
    lines[5] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")
    [problem] = audit_labels(DatasetHandle.load(tmp_path))
    assert "t=40" in problem


samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=200)


@settings(max_examples=80)
@given(samples, samples)
def test_overlap_symmetric_and_bounded(a, b):
    v = overlap_coefficient(a, b)
    assert 0 <= v <= 1
    assert v == pytest.approx(overlap_coefficient(b, a), abs=1e-12)


@settings(max_examples=80)
@given(samples, samples, st.sampled_from([0.5, 2.0, 8.0]), st.sampled_from([-100.0, 0.0, 3.0]))
def test_overlap_affine_invariant(a, b, scale, shift):
    # dyadic scales keep bin edges exact; arbitrary scales move points across edges by rounding
    v = overlap_coefficient(a, b)
    w = overlap_coefficient([scale * x + shift for x in a], [scale * x + shift for x in b])
    assert w == pytest.approx(v, abs=1e-9) or abs(w - v) <= 2 / min(len(a), len(b))


@settings(max_examples=40)
@given(st.integers(2, 60), st.integers(2, 8), st.integers(0, 2**31))
def test_pearson_symmetric_unit_diagonal(n, k, seed):
    X = np.random.default_rng(seed).normal(size=(n, k))
    c = pearson(X, tuple(f"c{i}" for i in range(k)))
    assert np.allclose(c.matrix, c.matrix.T)
    assert np.allclose(np.diag(c.matrix), 1)
    assert (np.abs(c.matrix) <= 1).all()
    assert shortlist(c) == shortlist(c)


@given(st.floats(-1e6, 1e6, allow_nan=False), st.integers(1, 50))
def test_constant_series_five_numbers_coincide(c, n):
    s = five_numbers([c] * n)
    assert s["min"] == s["q1"] == s["median"] == s["q3"] == s["max"] == c


def test_empty_dataset_handle(tmp_path):
    write_manifest(tmp_path, [])
    with pytest.raises(AnalysisError):
        analyze(DatasetHandle.load(tmp_path))
