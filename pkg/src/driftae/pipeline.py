"""Multi-sensor cycle ingestion and preprocessing.

A dataset is a set of fixed-length working cycles (60 seconds each) observed
by named sensor channels with native rates of 1, 10 or 100 Hz.  The pipeline
resamples every channel to 1 Hz by non-overlapping block means, standardizes
each sensor with statistics fitted on training cycles only, and flattens a
cycle to one feature vector in sensor-major order (feature 60*k + t is
sensor k at second t).

On disk a dataset is a directory of per-sensor tab-separated files (one row
per cycle) plus a profile file of per-cycle condition labels; a JSON
manifest maps files to sensor names and rates so other layouts need no code
changes.  A built-in manifest covers the common public hydraulic-rig layout.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

from .errors import ConfigError, DimensionError, IngestionError
from .fileio import atomic_writer
from .network import SEED_SPLIT, derive_seed

CYCLE_SECONDS = 60
VALID_RATES = (1, 10, 100)
COOLER_GRADES = (3.0, 20.0, 100.0)
HEALTHY_COOLER = 100.0

# the common public hydraulic-rig layout: 17 sensors, mixed rates
DEFAULT_MANIFEST = {
    "profile": "profile.txt",
    "profile_columns": ["cooler", "valve", "pump_leakage", "accumulator", "stable"],
    "sensors": (
        [{"name": f"PS{i}", "file": f"PS{i}.txt", "rate": 100} for i in range(1, 7)]
        + [{"name": "EPS1", "file": "EPS1.txt", "rate": 100}]
        + [{"name": f"FS{i}", "file": f"FS{i}.txt", "rate": 10} for i in (1, 2)]
        + [{"name": f"TS{i}", "file": f"TS{i}.txt", "rate": 1} for i in range(1, 5)]
        + [{"name": "VS1", "file": "VS1.txt", "rate": 1},
           {"name": "CE", "file": "CE.txt", "rate": 1},
           {"name": "CP", "file": "CP.txt", "rate": 1},
           {"name": "SE", "file": "SE.txt", "rate": 1}]
    ),
}


@dataclass
class SensorChannel:
    name: str
    rate: int
    data: np.ndarray  # cycles x (60 * rate), physical units

    def __post_init__(self):
        if self.rate not in VALID_RATES:
            raise ConfigError(f"sensor {self.name}: rate must be one of {VALID_RATES}")
        self.data = np.asarray(self.data, dtype=np.float64)
        want = CYCLE_SECONDS * self.rate
        if self.data.ndim != 2 or self.data.shape[1] != want:
            raise DimensionError(
                f"sensor {self.name}: expected cycles x {want} samples, "
                f"got shape {self.data.shape}")


@dataclass
class ConditionProfile:
    columns: list[str]
    values: np.ndarray  # cycles x len(columns)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise DimensionError(
                f"profile values {self.values.shape} do not match "
                f"{len(self.columns)} columns")
        if "cooler" not in self.columns:
            raise IngestionError("profile must carry a 'cooler' column")

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ConfigError(f"profile has no column {name!r}")
        return self.values[:, self.columns.index(name)]

    @property
    def cooler(self) -> np.ndarray:
        return self.column("cooler")


@dataclass
class CycleDataset:
    sensors: list[SensorChannel]
    profile: ConditionProfile

    def __post_init__(self):
        counts = {s.data.shape[0] for s in self.sensors}
        counts.add(self.profile.values.shape[0])
        if len(counts) != 1:
            raise IngestionError(f"inconsistent cycle counts across inputs: {sorted(counts)}")

    @property
    def n_cycles(self) -> int:
        return self.profile.values.shape[0]

    @property
    def sensor_names(self) -> list[str]:
        return [s.name for s in self.sensors]

    def sensor(self, name: str) -> SensorChannel:
        for s in self.sensors:
            if s.name == name:
                return s
        raise ConfigError(f"unknown sensor {name!r}; have {self.sensor_names}")

    def subset(self, indices) -> "CycleDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return CycleDataset(
            [SensorChannel(s.name, s.rate, s.data[idx].copy()) for s in self.sensors],
            ConditionProfile(list(self.profile.columns), self.profile.values[idx].copy()),
        )

    def copy(self) -> "CycleDataset":
        return self.subset(np.arange(self.n_cycles))


# ---------------------------------------------------------------------------
# ingestion

def _read_table(path: str, label: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise IngestionError(f"{label}: file not found: {path}")
    try:
        # round_trip: the fast parser drops the last ulp, which would break
        # write/load idempotence for values serialized with repr()
        frame = pd.read_csv(path, sep="\t", header=None, dtype=np.float64,
                            float_precision="round_trip")
    except pd.errors.ParserError as exc:
        raise IngestionError(f"{label}: ragged or malformed rows in {path}: {exc}") from exc
    except ValueError as exc:
        raise IngestionError(f"{label}: non-numeric data in {path}: {exc}") from exc
    values = frame.to_numpy()
    bad = np.flatnonzero(~np.isfinite(values).all(axis=1))
    if bad.size:
        raise IngestionError(
            f"{label}: missing or non-finite values in {path} at row {int(bad[0])}")
    return values


def read_manifest(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise IngestionError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"manifest {path} is not valid JSON: {exc}") from exc
    for key in ("profile", "profile_columns", "sensors"):
        if key not in manifest:
            raise IngestionError(f"manifest {path} is missing key {key!r}")
    return manifest


def load_raw_dataset(directory: str, manifest_path: str | None = None) -> CycleDataset:
    """Load per-sensor files and the profile as described by a manifest.

    Uses `directory/manifest.json` when present, else the built-in layout.
    """
    if not os.path.isdir(directory):
        raise IngestionError(f"dataset directory not found: {directory}")
    if manifest_path is None:
        candidate = os.path.join(directory, "manifest.json")
        manifest = read_manifest(candidate) if os.path.isfile(candidate) else DEFAULT_MANIFEST
    else:
        manifest = read_manifest(manifest_path)

    sensors = []
    for entry in manifest["sensors"]:
        name, fname, rate = entry["name"], entry["file"], int(entry["rate"])
        values = _read_table(os.path.join(directory, fname), f"sensor {name}")
        want = CYCLE_SECONDS * rate
        if values.shape[1] != want:
            raise IngestionError(
                f"sensor {name}: {fname} has {values.shape[1]} columns, "
                f"expected {want} (60 s at {rate} Hz)")
        sensors.append(SensorChannel(name, rate, values))

    prof_values = _read_table(os.path.join(directory, manifest["profile"]), "profile")
    columns = list(manifest["profile_columns"])
    if prof_values.shape[1] != len(columns):
        raise IngestionError(
            f"profile has {prof_values.shape[1]} columns, manifest names {len(columns)}")
    profile = ConditionProfile(columns, prof_values)

    counts = {s.name: s.data.shape[0] for s in sensors}
    counts["profile"] = prof_values.shape[0]
    if len(set(counts.values())) != 1:
        raise IngestionError(f"cycle counts disagree across files: {counts}")
    return CycleDataset(sensors, profile)


def write_dataset(dataset: CycleDataset, directory: str):
    """Materialize a dataset in the on-disk layout load_raw_dataset reads."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "profile": "profile.txt",
        "profile_columns": list(dataset.profile.columns),
        "sensors": [{"name": s.name, "file": f"{s.name}.txt", "rate": s.rate}
                    for s in dataset.sensors],
    }
    with atomic_writer(os.path.join(directory, "manifest.json")) as fh:
        json.dump(manifest, fh, indent=2)
    for s in dataset.sensors:
        with atomic_writer(os.path.join(directory, f"{s.name}.txt")) as fh:
            for row in s.data:
                fh.write("\t".join(repr(float(v)) for v in row) + "\n")
    with atomic_writer(os.path.join(directory, "profile.txt")) as fh:
        for row in dataset.profile.values:
            fh.write("\t".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# resampling

def resample_to_1hz(values, rate: int) -> np.ndarray:
    """Block-mean a 60*rate-sample signal down to 60 one-second means.

    Accepts a single cycle (1-D) or a stack of cycles (2-D, one per row).
    Rate 1 returns a copy of the input.
    """
    if rate not in VALID_RATES:
        raise ConfigError(f"rate must be one of {VALID_RATES}, got {rate}")
    arr = np.asarray(values, dtype=np.float64)
    want = CYCLE_SECONDS * rate
    if arr.shape[-1] != want:
        raise DimensionError(
            f"signal has {arr.shape[-1]} samples, expected {want} (60 s at {rate} Hz)")
    if rate == 1:
        return arr.copy()
    return arr.reshape(arr.shape[:-1] + (CYCLE_SECONDS, rate)).mean(axis=-1)


def resample_dataset(dataset: CycleDataset) -> np.ndarray:
    """All channels at 1 Hz: cycles x sensors x 60, in dataset sensor order."""
    stack = [resample_to_1hz(s.data, s.rate) for s in dataset.sensors]
    return np.stack(stack, axis=1)


# ---------------------------------------------------------------------------
# scaling

STD_EPSILON = 1e-9


@dataclass
class ScalerParams:
    """Per-sensor standardization constants, fitted on training cycles only."""

    names: list[str]
    mean: np.ndarray
    std: np.ndarray
    degenerate: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "mean": self.mean.tolist(),
                "std": self.std.tolist(), "degenerate": list(self.degenerate)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(list(d["names"]), np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["std"], dtype=np.float64), list(d.get("degenerate", [])))


def fit_scaler(train: CycleDataset) -> ScalerParams:
    """Mean/std per sensor over all 1 Hz time points of all training cycles.

    A sensor with std below 1e-9 is recorded as degenerate and scaled by 1
    so constant channels pass through as zeros instead of dividing by zero.
    """
    if train.n_cycles == 0:
        raise IngestionError("cannot fit a scaler on an empty training set")
    resampled = resample_dataset(train)  # C x S x 60
    mean = resampled.mean(axis=(0, 2))
    std = resampled.std(axis=(0, 2))
    degenerate = [train.sensors[i].name for i in np.flatnonzero(std < STD_EPSILON)]
    std = np.where(std < STD_EPSILON, 1.0, std)
    return ScalerParams(train.sensor_names, mean, std, degenerate)


def apply_scaler(scaler: ScalerParams, cycles: np.ndarray) -> np.ndarray:
    """Standardize a cycles x sensors x 60 stack sensor by sensor."""
    arr = np.asarray(cycles, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1] != len(scaler.names):
        raise DimensionError(
            f"expected cycles x {len(scaler.names)} sensors x 60, got {arr.shape}")
    return (arr - scaler.mean[:, None]) / scaler.std[:, None]


# ---------------------------------------------------------------------------
# flattening

def flatten(cycle: np.ndarray) -> np.ndarray:
    """Sensor-major flatten: feature 60*k + t is sensor k at second t.

    A single sensors x 60 cycle becomes a vector; a cycles x sensors x 60
    stack becomes a feature matrix with one row per cycle.
    """
    arr = np.asarray(cycle, dtype=np.float64)
    if arr.ndim not in (2, 3) or arr.shape[-1] != CYCLE_SECONDS:
        raise DimensionError(
            f"expected (..., sensors, {CYCLE_SECONDS}), got shape {arr.shape}")
    return arr.reshape(arr.shape[:-2] + (arr.shape[-2] * CYCLE_SECONDS,))


def unflatten(vector: np.ndarray, n_sensors: int) -> np.ndarray:
    """Inverse of flatten for one cycle: vector -> sensors x 60 view."""
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1 or arr.size != n_sensors * CYCLE_SECONDS:
        raise DimensionError(
            f"expected a flat vector of {n_sensors * CYCLE_SECONDS} features, "
            f"got shape {arr.shape}")
    return arr.reshape(n_sensors, CYCLE_SECONDS)


def to_features(dataset: CycleDataset, scaler: ScalerParams) -> np.ndarray:
    """Resample, standardize and flatten a dataset to cycles x (60 * sensors)."""
    if dataset.sensor_names != scaler.names:
        raise DimensionError(
            f"dataset sensors {dataset.sensor_names} do not match the scaler's "
            f"{scaler.names}")
    return flatten(apply_scaler(scaler, resample_dataset(dataset)))


# ---------------------------------------------------------------------------
# splits

class SplitIndices(NamedTuple):
    train: np.ndarray
    test: np.ndarray


def split_healthy(dataset: CycleDataset, ratio: float = 0.7,
                  seed: int = 0) -> SplitIndices:
    """Shuffle the healthy cycles (cooler grade 100) and cut at floor(ratio*H)."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    healthy = np.flatnonzero(dataset.profile.cooler == HEALTHY_COOLER)
    if healthy.size == 0:
        raise IngestionError("dataset contains no healthy cycles (cooler == 100)")
    rng = np.random.default_rng(derive_seed(seed, SEED_SPLIT))
    order = healthy[rng.permutation(healthy.size)]
    cut = int(ratio * healthy.size)
    if cut == 0 or cut == healthy.size:
        raise ConfigError(
            f"ratio {ratio} leaves an empty split for {healthy.size} healthy cycles")
    return SplitIndices(train=order[:cut], test=order[cut:])


def select_condition(dataset: CycleDataset, cooler_value: float) -> CycleDataset:
    """Cycles whose cooler grade matches exactly; value must be a known grade."""
    if float(cooler_value) not in COOLER_GRADES:
        raise ConfigError(
            f"cooler grade {cooler_value} is not in the label set {COOLER_GRADES}")
    idx = np.flatnonzero(dataset.profile.cooler == float(cooler_value))
    return dataset.subset(idx)
