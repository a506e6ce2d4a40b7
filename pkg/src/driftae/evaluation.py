"""Turn per-cycle prediction records into reportable results.

Three layers: per-scenario metric distributions, an unsupervised
separability check (k-means over the log-standardized metric trio) and CSV
exports for plotting -- per-cycle metrics and per-feature reconstruction
traces with uncertainty bands.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ensemble import PredictionRecord
from .errors import ConfigError, DimensionError, PersistenceError
from .fileio import atomic_writer
from .network import SEED_KMEANS, derive_seed
from .pipeline import CYCLE_SECONDS

METRIC_NAMES = ("recon_loss", "epistemic", "aleatoric")
LOG_FLOOR = 1e-12


@dataclass
class ScenarioResult:
    """Per-cycle metric trio for one scenario plus summary statistics."""

    label: str
    recon_loss: np.ndarray
    epistemic: np.ndarray
    aleatoric: np.ndarray

    def metric(self, name: str) -> np.ndarray:
        if name not in METRIC_NAMES:
            raise ConfigError(f"unknown metric {name!r}")
        return getattr(self, name)

    @property
    def n_cycles(self) -> int:
        return self.recon_loss.size

    def stats(self) -> dict[str, dict[str, float]]:
        out = {}
        for name in METRIC_NAMES:
            v = self.metric(name)
            out[name] = {
                "mean": float(v.mean()),
                "median": float(np.median(v)),
                "q05": float(np.quantile(v, 0.05)),
                "q95": float(np.quantile(v, 0.95)),
            }
        return out

    def trio(self) -> np.ndarray:
        return np.column_stack([self.recon_loss, self.epistemic, self.aleatoric])


def summarize(records: list[PredictionRecord], label: str) -> ScenarioResult:
    """Collect the scalar metric trio of a record list under one scenario label."""
    if not records:
        raise ConfigError(f"scenario {label!r} has no records to summarize")
    return ScenarioResult(
        label,
        np.array([r.recon_loss for r in records]),
        np.array([r.epistemic for r in records]),
        np.array([r.aleatoric for r in records]),
    )


# ---------------------------------------------------------------------------
# clustering

@dataclass
class ClusterReport:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: list[float]
    purity: float | None = None


def log_standardize(points: np.ndarray, floor: float = LOG_FLOOR) -> np.ndarray:
    """log10 with a zero floor, then per-axis standardization.

    The metric trio spans orders of magnitude across scenarios; clustering
    in raw units would be dominated by the largest axis.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"points must be 2-D, got shape {arr.shape}")
    logged = np.log10(np.maximum(arr, floor))
    std = logged.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return (logged - logged.mean(axis=0)) / std


def _assign(points: np.ndarray, centroids: np.ndarray):
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, d2[np.arange(points.shape[0]), labels]


def kmeans(points: np.ndarray, k: int, seed: int = 0,
           max_iter: int = 300) -> ClusterReport:
    """Lloyd iterations from a distance-weighted (k-means++) seeding.

    Deterministic per seed; an emptied cluster is re-seeded to the point
    farthest from its current centroid; stops at an assignment fixpoint.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionError(f"points must be 2-D, got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= n points, got k={k}, n={n}")
    rng = np.random.default_rng(derive_seed(seed, SEED_KMEANS))

    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    for j in range(1, k):
        d2 = ((points[:, None, :] - centroids[None, :j, :]) ** 2).sum(axis=2).min(axis=1)
        total = d2.sum()
        if total <= 0.0:  # all remaining points coincide with a centroid
            centroids[j] = points[rng.integers(n)]
        else:
            centroids[j] = points[rng.choice(n, p=d2 / total)]

    labels = np.full(n, -1, dtype=np.intp)
    history = []
    for _ in range(max_iter):
        new_labels, dists = _assign(points, centroids)
        for _round in range(k):  # a re-seed can empty another cluster
            empties = np.setdiff1d(np.arange(k), new_labels)
            if empties.size == 0:
                break
            centroids[int(empties[0])] = points[int(np.argmax(dists))]
            new_labels, dists = _assign(points, centroids)
        history.append(float(dists.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            mask = labels == j
            if mask.any():  # ties can leave a cluster unfillable
                centroids[j] = points[mask].mean(axis=0)
    inertia = float(_assign(points, centroids)[1].sum())
    return ClusterReport(k, labels, centroids, inertia, history)


def cluster_purity(assignments, labels) -> float:
    """Fraction of points whose cluster's majority label matches their own."""
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    if assignments.shape != labels.shape:
        raise DimensionError(
            f"{assignments.size} assignments vs {labels.size} labels")
    if assignments.size == 0:
        raise ConfigError("cannot compute purity of an empty clustering")
    correct = 0
    for cluster in np.unique(assignments):
        _, counts = np.unique(labels[assignments == cluster], return_counts=True)
        correct += int(counts.max())
    return correct / assignments.size


def evaluate_clusters(trio: np.ndarray, labels, k: int, seed: int = 0) -> ClusterReport:
    """Cluster the log-standardized metric trio and score purity against labels."""
    report = kmeans(log_standardize(trio), k, seed)
    report.purity = cluster_purity(report.assignments, np.asarray(labels))
    return report


# ---------------------------------------------------------------------------
# exports

def export_metrics_csv(results: list[ScenarioResult], path: str):
    """One row per cycle: scenario label plus the metric trio, full precision."""
    with atomic_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", *METRIC_NAMES])
        for result in results:
            for i in range(result.n_cycles):
                writer.writerow([result.label, repr(float(result.recon_loss[i])),
                                 repr(float(result.epistemic[i])),
                                 repr(float(result.aleatoric[i]))])


def read_metrics_csv(path: str):
    """Inverse of export_metrics_csv: (labels list, trio matrix)."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["scenario", *METRIC_NAMES]:
                raise PersistenceError(f"{path}: unexpected header {header}")
            labels, rows = [], []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 4:
                    raise PersistenceError(f"{path}: malformed row {lineno}")
                labels.append(row[0])
                try:
                    rows.append([float(v) for v in row[1:]])
                except ValueError as exc:
                    raise PersistenceError(f"{path}: bad number on row {lineno}") from exc
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise PersistenceError(f"{path}: no data rows")
    return labels, np.asarray(rows)


def export_trace_csv(cycle_index: int, actual: np.ndarray,
                     record: PredictionRecord, sensor_names: list[str], path: str):
    """Per-feature reconstruction trace: one row per (sensor, second).

    `actual` is the standardized sensors x 60 cycle the record was computed
    from; uncertainty columns are standard deviations so they plot directly
    as bands around the reconstruction.
    """
    actual = np.asarray(actual, dtype=np.float64)
    s = len(sensor_names)
    if actual.shape != (s, CYCLE_SECONDS):
        raise DimensionError(
            f"actual cycle must be {s} x {CYCLE_SECONDS}, got {actual.shape}")
    recon = record.mean.reshape(s, CYCLE_SECONDS)
    epi_std = np.sqrt(record.epistemic_var).reshape(s, CYCLE_SECONDS)
    ale_std = np.sqrt(record.aleatoric_var).reshape(s, CYCLE_SECONDS)
    with atomic_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cycle", "sensor", "second", "actual", "reconstructed",
                         "epistemic_std", "aleatoric_std"])
        for k, name in enumerate(sensor_names):
            for t in range(CYCLE_SECONDS):
                writer.writerow([cycle_index, name, t, repr(float(actual[k, t])),
                                 repr(float(recon[k, t])), repr(float(epi_std[k, t])),
                                 repr(float(ale_std[k, t]))])
