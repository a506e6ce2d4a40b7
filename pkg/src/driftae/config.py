"""Experiment configuration: one JSON document describing data source,
training hyperparameters and the scenario list, schema-checked up front so a
typo fails before any work starts.  Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .drift import DRIFT_KINDS
from .ensemble import TrainConfig
from .errors import ConfigError
from .network import ACTIVATIONS
from .synthetic import SyntheticConfig

DEFAULT_HIDDEN = [500, 250, 3, 250, 500]


@dataclass(frozen=True)
class DataConfig:
    kind: str  # "synthetic" | "directory"
    path: str | None = None
    manifest: str | None = None
    synthetic: SyntheticConfig | None = None


@dataclass(frozen=True)
class DriftSweep:
    sensor: str
    kind: str
    levels: tuple[float, ...]
    seed: int = 0


@dataclass(frozen=True)
class ScenariosConfig:
    real_drift: tuple[float, ...] = ()
    drifts: tuple[DriftSweep, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    out_dir: str
    data: DataConfig
    train: TrainConfig
    hidden: tuple[int, ...]
    activation: str
    split_ratio: float
    scenarios: ScenariosConfig = field(default_factory=ScenariosConfig)


def _check_keys(d: dict, allowed: set[str], required: set[str], where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object, got {type(d).__name__}")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    missing = required - set(d)
    if missing:
        raise ConfigError(f"missing key(s) in {where}: {sorted(missing)}")


def _num(d: dict, key: str, default, where: str, kind=float, minimum=None):
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {value!r}")
    value = kind(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}, got {value}")
    return value


def _parse_data(d: dict) -> DataConfig:
    kind = d.get("kind")
    if kind == "directory":
        _check_keys(d, {"kind", "path", "manifest"}, {"kind", "path"}, "data")
        if not isinstance(d["path"], str):
            raise ConfigError("data.path must be a string")
        manifest = d.get("manifest")
        if manifest is not None and not isinstance(manifest, str):
            raise ConfigError("data.manifest must be a string or null")
        return DataConfig("directory", path=d["path"], manifest=manifest)
    if kind == "synthetic":
        _check_keys(d, {"kind", "sensors", "cycles", "noise_std", "drift_offset",
                        "amp_gain", "n_affected"}, {"kind"}, "data")
        n_affected = d.get("n_affected")
        if n_affected is not None:
            n_affected = int(_num(d, "n_affected", None, "data", int, 1))
        synth = SyntheticConfig(
            sensors=int(_num(d, "sensors", 6, "data", int, 2)),
            cycles=int(_num(d, "cycles", 400, "data", int, 10)),
            noise_std=_num(d, "noise_std", 0.05, "data", float, 0.0),
            drift_offset=_num(d, "drift_offset", 4.0, "data", float),
            amp_gain=_num(d, "amp_gain", 0.5, "data", float),
            n_affected=n_affected,
        )
        return DataConfig("synthetic", synthetic=synth)
    raise ConfigError(f"data.kind must be 'directory' or 'synthetic', got {kind!r}")


def _parse_drift_sweep(d: dict, where: str) -> DriftSweep:
    _check_keys(d, {"sensor", "kind", "levels", "seed"}, {"sensor", "kind", "levels"}, where)
    if not isinstance(d["sensor"], str):
        raise ConfigError(f"{where}.sensor must be a string")
    if d["kind"] not in DRIFT_KINDS:
        raise ConfigError(f"{where}.kind must be one of {DRIFT_KINDS}, got {d['kind']!r}")
    levels = d["levels"]
    if (not isinstance(levels, list) or not levels
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0
                   for v in levels)):
        raise ConfigError(f"{where}.levels must be a non-empty list of fractions >= 0")
    return DriftSweep(d["sensor"], d["kind"], tuple(float(v) for v in levels),
                      int(_num(d, "seed", 0, where, int)))


def _parse_scenarios(d: dict) -> ScenariosConfig:
    _check_keys(d, {"real_drift", "drifts"}, set(), "scenarios")
    real = d.get("real_drift", [])
    if not isinstance(real, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in real):
        raise ConfigError("scenarios.real_drift must be a list of numbers")
    drifts = d.get("drifts", [])
    if not isinstance(drifts, list):
        raise ConfigError("scenarios.drifts must be a list")
    sweeps = tuple(_parse_drift_sweep(entry, f"scenarios.drifts[{i}]")
                   for i, entry in enumerate(drifts))
    return ScenariosConfig(tuple(float(v) for v in real), sweeps)


def parse_experiment(doc: dict) -> ExperimentConfig:
    _check_keys(doc, {"seed", "out_dir", "data", "train", "scenarios"},
                {"data"}, "config")
    seed = int(_num(doc, "seed", 0, "config", int))
    out_dir = doc.get("out_dir", "runs/out")
    if not isinstance(out_dir, str):
        raise ConfigError("config.out_dir must be a string")

    t = doc.get("train", {})
    _check_keys(t, {"m", "lambda", "epochs", "batch_size", "learning_rate",
                    "anchor_std_scale", "hidden", "activation", "split_ratio"},
                set(), "train")
    hidden = t.get("hidden", DEFAULT_HIDDEN)
    if (not isinstance(hidden, list) or not hidden
            or any(isinstance(w, bool) or not isinstance(w, int) or w < 1
                   for w in hidden)):
        raise ConfigError("train.hidden must be a non-empty list of positive ints")
    activation = t.get("activation", "leaky_relu")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"train.activation must be one of {ACTIVATIONS}")
    split_ratio = _num(t, "split_ratio", 0.7, "train", float)
    if not 0.0 < split_ratio < 1.0:
        raise ConfigError(f"train.split_ratio must be in (0, 1), got {split_ratio}")
    train = TrainConfig(
        m=int(_num(t, "m", 10, "train", int, 1)),
        lam=_num(t, "lambda", 0.01, "train", float, 0.0),
        epochs=int(_num(t, "epochs", 150, "train", int, 1)),
        batch_size=int(_num(t, "batch_size", 32, "train", int, 1)),
        learning_rate=_num(t, "learning_rate", 1e-3, "train", float),
        seed=seed,
        anchor_std_scale=_num(t, "anchor_std_scale", 1.0, "train", float, 0.0),
    )
    scenarios = _parse_scenarios(doc.get("scenarios", {}))
    return ExperimentConfig(seed, out_dir, _parse_data(doc["data"]), train,
                            tuple(hidden), activation, split_ratio, scenarios)


def load_experiment_config(path: str) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_experiment(doc)
