"""Virtual-drift injection: perturb one sensor's raw signal at a time.

Two fault kinds are supported, both applied in physical units before any
resampling or scaling, the way a faulty transducer would feed an already
deployed pipeline:

* offset -- every sample of the target sensor gains level * reference,
  emulating a constant calibration drift;
* noise  -- every sample gains an independent draw from
  Uniform(-level * reference, +level * reference).

The amplitude reference is the sensor's mean over the raw training cycles;
a near-zero mean falls back to the training standard deviation so the level
fraction stays meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .network import SEED_NOISE, derive_seed
from .pipeline import CycleDataset

DRIFT_KINDS = ("noise", "offset")
MEAN_EPSILON = 1e-9


def sensor_reference_mean(train: CycleDataset, sensor: str) -> float:
    """Arithmetic mean of all raw samples of one sensor over training cycles."""
    return float(train.sensor(sensor).data.mean())


@dataclass(frozen=True)
class DriftSpec:
    """One perturbation: target sensor, fault kind, level fraction, seed.

    `reference` is the resolved amplitude referent (training mean, or the
    training std when the mean is within 1e-9 of zero -- `used_std_fallback`
    records which).  Level 0 is accepted and acts as the identity, for
    baseline sweeps.
    """

    sensor: str
    kind: str
    level: float
    seed: int = 0
    reference: float = 1.0
    used_std_fallback: bool = False

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ConfigError(f"drift kind must be one of {DRIFT_KINDS}, got {self.kind!r}")
        if self.level < 0:
            raise ConfigError(f"drift level must be >= 0, got {self.level}")


def make_drift_spec(train: CycleDataset, sensor: str, kind: str, level: float,
                    seed: int = 0) -> DriftSpec:
    """Build a DriftSpec with the amplitude reference resolved from training data."""
    channel = train.sensor(sensor)  # validates the name
    mean = float(channel.data.mean())
    if abs(mean) < MEAN_EPSILON:
        return DriftSpec(sensor, kind, level, seed,
                         reference=float(channel.data.std()), used_std_fallback=True)
    return DriftSpec(sensor, kind, level, seed, reference=mean)


def inject_offset(dataset: CycleDataset, spec: DriftSpec) -> CycleDataset:
    """Add level * reference to every raw sample of the target sensor."""
    if spec.kind != "offset":
        raise ConfigError(f"inject_offset got a {spec.kind!r} spec")
    out = dataset.copy()
    out.sensor(spec.sensor).data += spec.level * spec.reference
    return out


def inject_noise(dataset: CycleDataset, spec: DriftSpec) -> CycleDataset:
    """Add iid Uniform(-level*reference, +level*reference) to the target sensor."""
    if spec.kind != "noise":
        raise ConfigError(f"inject_noise got a {spec.kind!r} spec")
    out = dataset.copy()
    channel = out.sensor(spec.sensor)
    bound = spec.level * abs(spec.reference)
    rng = np.random.default_rng(derive_seed(spec.seed, SEED_NOISE))
    channel.data += rng.uniform(-bound, bound, size=channel.data.shape)
    return out


def inject(dataset: CycleDataset, spec: DriftSpec) -> CycleDataset:
    if spec.kind == "offset":
        return inject_offset(dataset, spec)
    return inject_noise(dataset, spec)
