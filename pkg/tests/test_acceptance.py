"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the pytest terminal summary and printed
with ``-s``) before asserting, so a failing criterion still reports its measured value.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from edgeanomaly.analysis import (
    analyze,
    anomaly_ratio,
    audit_labels,
    correlation_matrix,
    overlap_coefficient,
    shortlist,
)
from edgeanomaly.appmodel import Compute, app_registry
from edgeanomaly.config import default_corpus, parse_config
from edgeanomaly.dataset import DatasetHandle, read_trace
from edgeanomaly.orchestrator import run, run_corpus
from edgeanomaly.perfmodel import des_oracle, mm1_percentiles

EXPECTED_SHORTLIST = {"cpu_usage", "rss", "rx_bytes_per_ns", "vsize", "request_throughput", "latency_p50"}


@contextmanager
def criterion(acceptance, n):
    box = {"ok": False, "detail": "did not complete"}
    try:
        yield box
    finally:
        acceptance[n] = (box["ok"], box["detail"])
        print(f"criterion {n}: {'PASS' if box['ok'] else 'FAIL'}  {box['detail']}")


@pytest.fixture(scope="module")
def timed_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance_corpus")
    t0 = time.perf_counter()
    handles = run_corpus(default_corpus(), root)
    return root, handles, time.perf_counter() - t0


@pytest.fixture(scope="module")
def corpus_records(timed_corpus):
    root, _, _ = timed_corpus
    ds = DatasetHandle.load(root)
    return ds, {t.microservice: read_trace(t.path) for t in ds.traces}


def test_criterion_1_record_count(acceptance, location_doc, tmp_path):
    with criterion(acceptance, 1) as c:
        t0 = time.perf_counter()
        h = run(parse_config(location_doc), tmp_path)
        elapsed = time.perf_counter() - t0
        n = len(read_trace(h.traces[0].path))
        c["ok"] = n == 1800 and elapsed < 5
        c["detail"] = f"location_service records={n} (want 1800), runtime={elapsed:.2f}s (< 5s)"
    assert c["ok"]


def test_criterion_2_anomaly_ratio(acceptance, timed_corpus):
    root, _, elapsed = timed_corpus
    with criterion(acceptance, 2) as c:
        ratio = anomaly_ratio(DatasetHandle.load(root))
        c["ok"] = 0.04 <= ratio <= 0.06 and elapsed < 60
        c["detail"] = f"anomaly ratio={ratio:.4f} (band [0.04, 0.06]), runtime={elapsed:.2f}s (< 60s)"
    assert c["ok"]


def test_criterion_3_collinearity(acceptance, corpus_records):
    ds, _ = corpus_records
    with criterion(acceptance, 3) as c:
        corr = correlation_matrix(ds)
        pairs = [
            ("latency_p50", "latency_p90"),
            ("latency_p50", "latency_p99"),
            ("latency_p90", "latency_p99"),
            ("request_throughput", "tx_bytes_per_ns"),
            ("total_disk_write_throughput", "total_disk_read_throughput"),
            ("total_disk_write_throughput", "rx_bytes_per_ns"),
            ("total_disk_read_throughput", "rx_bytes_per_ns"),
        ]
        rs = {f"{a}~{b}": corr.r(a, b) for a, b in pairs}
        picked = shortlist(corr)
        weakest = min(rs, key=rs.get)
        c["ok"] = all(v > 0.9 for v in rs.values()) and set(picked) == EXPECTED_SHORTLIST and len(picked) == 6
        c["detail"] = f"min group r={rs[weakest]:.3f} ({weakest}), shortlist={picked}"
    assert c["ok"]


def test_criterion_4_qos_orderings(acceptance, corpus_records):
    _, recs = corpus_records

    def median(ms, metric):
        return float(np.median([getattr(r, metric) for r in recs[ms] if r.label == 0]))

    with criterion(acceptance, 4) as c:
        hci = ["preprocessor", "face_detector", "face_recognizer"]
        others = [m for m in recs if m not in hci]
        heavy = {m.id for a in app_registry().values() for m in a.microservices if m.qos.compute in (Compute.HCI, Compute.MCI)}
        light = [m for m in recs if m not in heavy]
        lat_ok = min(median(m, "latency_p50") for m in hci) > max(median(m, "latency_p50") for m in others)
        cpu_top = max(recs, key=lambda m: median(m, "cpu_usage"))
        rx_top = max(recs, key=lambda m: median(m, "rx_bytes_per_ns"))
        rss_ok = min(median(m, "rss") for m in heavy) > max(median(m, "rss") for m in light)
        c["ok"] = lat_ok and cpu_top == "preprocessor" and rx_top == "preprocessor" and rss_ok
        c["detail"] = (
            f"HCI p50 min={min(median(m, 'latency_p50') for m in hci):.1f}ms > others max="
            f"{max(median(m, 'latency_p50') for m in others):.1f}ms: {lat_ok}; top cpu={cpu_top}; "
            f"top rx={rx_top}; HCI/MCI rss above others: {rss_ok}"
        )
    assert c["ok"]


def test_criterion_5_non_trivial(acceptance, corpus_records):
    _, recs = corpus_records
    with criterion(acceptance, 5) as c:
        det = recs["face_detector"]
        normal = [r for r in det if r.label == 0]
        hog = [r for r in det if r.anomaly_kind == "cpu_hog"]
        ov = overlap_coefficient([r.cpu_usage for r in normal], [r.cpu_usage for r in hog])
        med = float(np.median([r.latency_p90 for r in normal]))
        frac = float(np.mean([r.latency_p90 > med for r in hog]))
        c["ok"] = ov > 0.10 and frac >= 0.9
        c["detail"] = f"cpu_usage overlap={ov:.3f} (> 0.10) over {len(hog)} windows, p90 above normal median in {frac:.1%} (>= 90%)"
    assert c["ok"]


_des_errors = []


@settings(max_examples=10, derandomize=True, deadline=None, database=None,
          suppress_health_check=[HealthCheck.too_slow])
@given(mu=st.floats(1.0, 100.0), rho=st.floats(0.05, 0.75), seed=st.integers(0, 2**32 - 1))
def _des_property(mu, rho, seed):
    lam = rho * mu
    got = des_oracle(mu, lam, 10**6, np.random.default_rng(seed))
    want = mm1_percentiles(mu, lam)
    err = max(abs(g - w) / w for g, w in zip(got, want))
    _des_errors.append((err, mu, lam))
    assert err < 0.03


def test_criterion_6_queueing(acceptance, corpus_records):
    _, recs = corpus_records
    with criterion(acceptance, 6) as c:
        _des_errors.clear()
        des_ok = True
        try:
            _des_property()
        except AssertionError:
            des_ok = False
        worst = max(_des_errors)
        allr = [r for rs in recs.values() for r in rs]
        zeros = all(r.errors_per_ns == 0 for r in allr)
        mono = all(r.latency_p50 <= r.latency_p90 <= r.latency_p99 for r in allr)
        c["ok"] = des_ok and len(_des_errors) >= 10 and zeros and mono
        c["detail"] = (
            f"DES vs closed form: {len(_des_errors)} pairs, worst rel err={worst[0]:.4f} "
            f"(mu={worst[1]:.2f}, lambda={worst[2]:.2f}); errors_per_ns all zero: {zeros}; "
            f"p50<=p90<=p99 in {len(allr)} records: {mono}"
        )
    assert c["ok"]


def test_criterion_7_determinism_and_labels(acceptance, tmp_path):
    with criterion(acceptance, 7) as c:
        a, b = tmp_path / "t1", tmp_path / "t8"
        run_corpus(default_corpus(), a, threads=1)
        run_corpus(default_corpus(), b, threads=8)
        files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        same = files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file()) and all(
            (a / f).read_bytes() == (b / f).read_bytes() for f in files
        )
        problems = audit_labels(DatasetHandle.load(a))
        c["ok"] = same and not problems and len(files) == 9
        c["detail"] = f"{len(files)} files byte-identical at threads=1 vs 8: {same}; label mismatches={len(problems)}"
    assert c["ok"]


def test_report_verdicts_match(corpus_records):
    ds, _ = corpus_records
    assert all(analyze(ds).verdicts.values())
