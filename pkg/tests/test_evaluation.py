"""Tests for scenario summaries, clustering, and CSV exports."""

import numpy as np
import pytest

from driftae.ensemble import PredictionRecord
from driftae.errors import ConfigError, DimensionError, PersistenceError
from driftae.evaluation import (METRIC_NAMES, ScenarioResult, cluster_purity,
                                evaluate_clusters, export_metrics_csv,
                                export_trace_csv, kmeans, log_standardize,
                                read_metrics_csv, summarize)


def fake_records(values):
    d = 4
    return [PredictionRecord(mean=np.zeros(d), epistemic_var=np.zeros(d),
                             aleatoric_var=np.zeros(d), recon_loss=v,
                             epistemic=v * 10, aleatoric=v * 100)
            for v in values]


# ---------------------------------------------------------------------------
# summaries

def test_summarize_single_record():
    result = summarize(fake_records([2.5]), "one")
    assert result.label == "one"
    assert result.n_cycles == 1
    stats = result.stats()
    for name, scale in zip(METRIC_NAMES, (1, 10, 100)):
        assert stats[name]["mean"] == 2.5 * scale
        assert stats[name]["median"] == 2.5 * scale


def test_summarize_known_sequence():
    result = summarize(fake_records([1, 2, 3, 4, 5]), "seq")
    stats = result.stats()["recon_loss"]
    assert stats["mean"] == 3.0
    assert stats["median"] == 3.0
    # linear-interpolation quantiles over 5 points
    assert stats["q05"] == pytest.approx(1.2)
    assert stats["q95"] == pytest.approx(4.8)


def test_summarize_quantiles_match_sort_oracle():
    rng = np.random.default_rng(0)
    values = rng.exponential(size=101)
    result = summarize(fake_records(values), "x")
    stats = result.stats()["recon_loss"]
    s = np.sort(values)
    assert stats["q05"] == pytest.approx(s[5])  # (101-1) * 0.05 = 5 exactly
    assert stats["q95"] == pytest.approx(s[95])
    assert stats["median"] == pytest.approx(s[50])


def test_summarize_empty_rejected():
    with pytest.raises(ConfigError):
        summarize([], "empty")


def test_trio_column_order():
    result = summarize(fake_records([1.0, 2.0]), "x")
    trio = result.trio()
    assert trio.shape == (2, 3)
    np.testing.assert_allclose(trio[:, 0], [1.0, 2.0])
    np.testing.assert_allclose(trio[:, 1], [10.0, 20.0])
    np.testing.assert_allclose(trio[:, 2], [100.0, 200.0])


# ---------------------------------------------------------------------------
# clustering

def blobs(centers, n=30, spread=0.05, seed=0):
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for i, c in enumerate(centers):
        points.append(np.asarray(c) + spread * rng.standard_normal((n, len(c))))
        labels.extend([i] * n)
    return np.vstack(points), np.array(labels)


def test_kmeans_single_cluster_is_mean():
    points, _ = blobs([[1.0, 2.0]], n=50)
    report = kmeans(points, k=1, seed=0)
    np.testing.assert_allclose(report.centroids[0], points.mean(axis=0), atol=1e-12)
    assert np.all(report.assignments == 0)


def test_kmeans_separates_distant_blobs():
    points, labels = blobs([[0, 0], [10, 0], [0, 10], [10, 10]], n=25)
    report = kmeans(points, k=4, seed=0)
    assert cluster_purity(report.assignments, labels) == 1.0


def test_kmeans_inertia_history_non_increasing():
    rng = np.random.default_rng(7)
    points = rng.normal(size=(200, 3))
    for seed in range(5):
        report = kmeans(points, k=5, seed=seed)
        hist = report.inertia_history
        assert all(a >= b - 1e-9 for a, b in zip(hist, hist[1:]))
        assert report.inertia == pytest.approx(hist[-1])


def test_kmeans_deterministic():
    points, _ = blobs([[0, 0], [5, 5]], n=40, spread=1.0)
    a = kmeans(points, k=2, seed=3)
    b = kmeans(points, k=2, seed=3)
    assert np.array_equal(a.assignments, b.assignments)
    assert np.array_equal(a.centroids, b.centroids)


def test_kmeans_k_bounds():
    points = np.zeros((3, 2))
    with pytest.raises(ConfigError):
        kmeans(points, k=0)
    with pytest.raises(ConfigError):
        kmeans(points, k=4)
    report = kmeans(points, k=3, seed=0)  # duplicate points still work
    assert report.inertia == 0.0


def test_kmeans_duplicate_points_fill_all_clusters():
    # more clusters than distinct locations: seeding must not divide by zero
    points = np.array([[0.0, 0.0]] * 5 + [[1.0, 1.0]] * 5)
    report = kmeans(points, k=3, seed=0)
    assert report.assignments.shape == (10,)
    assert np.isfinite(report.inertia)


# ---------------------------------------------------------------------------
# purity

def test_purity_perfect_and_worst_case():
    assert cluster_purity([0, 0, 1, 1], ["a", "a", "b", "b"]) == 1.0
    assert cluster_purity([0, 0, 1, 1], ["a", "b", "a", "b"]) == 0.5


def test_purity_random_assignment_baseline():
    # random clusters over L balanced labels give purity near 1/L... plus
    # majority-count inflation, so just check it sits well below 1
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(4), 100)
    assignments = rng.integers(0, 4, size=400)
    p = cluster_purity(assignments, labels)
    assert 0.2 <= p <= 0.45


def test_purity_validates_input():
    with pytest.raises(DimensionError):
        cluster_purity([0, 1], ["a"])
    with pytest.raises(ConfigError):
        cluster_purity([], [])


def test_log_standardize_handles_zeros():
    points = np.array([[0.0, 1.0], [1e-3, 10.0], [1.0, 100.0]])
    out = log_standardize(points)
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-12)


def test_log_standardize_constant_axis():
    points = np.ones((5, 2))
    out = log_standardize(points)
    assert np.all(out == 0.0)


def test_evaluate_clusters_end_to_end():
    # three scenario populations separated by orders of magnitude
    trio, labels = blobs([[1e-3, 1e-4, 1e-3], [1.0, 1e-4, 1e-3], [1.0, 1.0, 1.0]],
                         n=20, spread=1e-5)
    report = evaluate_clusters(np.abs(trio), labels, k=3, seed=0)
    assert report.purity == 1.0


# ---------------------------------------------------------------------------
# CSV round trips

def test_metrics_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    results = [summarize(fake_records(rng.exponential(size=7)), "healthy"),
               summarize(fake_records(rng.exponential(size=5)), "noise_25")]
    path = str(tmp_path / "metrics.csv")
    export_metrics_csv(results, path)
    labels, trio = read_metrics_csv(path)
    assert labels == ["healthy"] * 7 + ["noise_25"] * 5
    expected = np.vstack([results[0].trio(), results[1].trio()])
    assert np.array_equal(trio, expected)  # repr round-trip is bit exact


def test_metrics_csv_rejects_malformed(tmp_path):
    path = str(tmp_path / "metrics.csv")
    with pytest.raises(PersistenceError):
        read_metrics_csv(path)  # missing

    path2 = str(tmp_path / "bad_header.csv")
    with open(path2, "w") as fh:
        fh.write("a,b\n1,2\n")
    with pytest.raises(PersistenceError):
        read_metrics_csv(path2)

    path3 = str(tmp_path / "bad_row.csv")
    with open(path3, "w") as fh:
        fh.write("scenario,recon_loss,epistemic,aleatoric\nx,1.0,2.0\n")
    with pytest.raises(PersistenceError):
        read_metrics_csv(path3)

    path4 = str(tmp_path / "bad_value.csv")
    with open(path4, "w") as fh:
        fh.write("scenario,recon_loss,epistemic,aleatoric\nx,1.0,2.0,oops\n")
    with pytest.raises(PersistenceError):
        read_metrics_csv(path4)

    path5 = str(tmp_path / "empty.csv")
    with open(path5, "w") as fh:
        fh.write("scenario,recon_loss,epistemic,aleatoric\n")
    with pytest.raises(PersistenceError):
        read_metrics_csv(path5)


def test_trace_csv_layout(tmp_path):
    s, d = 3, 180
    rng = np.random.default_rng(1)
    record = PredictionRecord(mean=rng.normal(size=d),
                              epistemic_var=rng.uniform(0.1, 1.0, d),
                              aleatoric_var=rng.uniform(0.1, 1.0, d),
                              recon_loss=1.0, epistemic=0.5, aleatoric=0.5)
    path = str(tmp_path / "trace.csv")
    export_trace_csv(4, rng.normal(size=(s, 60)), record, ["a", "b", "c"], path)
    lines = open(path).read().splitlines()
    assert lines[0] == "cycle,sensor,second,actual,reconstructed,epistemic_std,aleatoric_std"
    assert len(lines) == 1 + s * 60
    first = lines[1].split(",")
    assert first[0] == "4" and first[1] == "a" and first[2] == "0"
    # uncertainty columns are standard deviations of the stored variances
    assert float(first[5]) == pytest.approx(np.sqrt(record.epistemic_var[0]))


def test_trace_csv_validates_shape(tmp_path):
    record = PredictionRecord(mean=np.zeros(120), epistemic_var=np.zeros(120),
                              aleatoric_var=np.zeros(120), recon_loss=0.0,
                              epistemic=0.0, aleatoric=0.0)
    with pytest.raises(DimensionError):
        export_trace_csv(0, np.zeros((2, 59)), record, ["a", "b"],
                         str(tmp_path / "x.csv"))
