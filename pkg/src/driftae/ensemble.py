"""Anchored-ensemble Bayesian autoencoder.

Each ensemble member is an independent autoencoder trained to a randomized
MAP objective: heteroscedastic Gaussian negative log-likelihood plus a
squared pull toward member-specific anchor parameters drawn once from the
initialization distribution and frozen.  The trained members act as
approximate posterior samples: the spread of their reconstructions is the
epistemic uncertainty, the exponentiated log-variance head the aleatoric
one.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, DimensionError, NumericError,
                     PersistenceError, TrainingError)
from .fileio import write_text
from .network import (SEED_ANCHOR, SEED_INIT, SEED_SHUFFLE, LossSpec,
                      NetworkSpec, OptimizerState, ParameterSet, adam_step,
                      as_matrix, backward, derive_seed, forward, init_params,
                      init_std)
from .pipeline import ScalerParams

MODEL_FORMAT = "driftae-ensemble"
MODEL_VERSION = 1


# ---------------------------------------------------------------------------
# losses

def gaussian_nll(x, mean, log_var) -> float:
    """Diagonal-Gaussian negative log-likelihood (constants dropped).

    Per sample: sum over features of (x-mean)^2 / (2 exp(log_var))
    + log_var / 2; averaged over the batch.  Reduces to half the summed
    squared error when log_var is zero.
    """
    x = as_matrix(x)
    mean = as_matrix(mean, name="mean")
    log_var = as_matrix(log_var, name="log_var")
    if x.shape != mean.shape or x.shape != log_var.shape:
        raise DimensionError(
            f"shape mismatch: x {x.shape}, mean {mean.shape}, log_var {log_var.shape}"
        )
    if x.shape[0] == 0:
        raise DimensionError("empty batch")
    value = float(np.sum((x - mean) ** 2 * np.exp(-log_var) * 0.5
                         + 0.5 * log_var) / x.shape[0])
    if not np.isfinite(value):
        raise NumericError(f"non-finite likelihood loss: {value!r}")
    return value


def anchor_penalty(params: ParameterSet, anchor_flat: np.ndarray,
                   lam: float, n_train: int) -> float:
    """(lam / n_train) * sum of squared deviations from the anchor values."""
    if n_train < 1:
        raise ConfigError(f"n_train must be >= 1, got {n_train}")
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}")
    anchor_flat = np.asarray(anchor_flat, dtype=np.float64).ravel()
    if anchor_flat.shape != params.flat.shape:
        raise DimensionError(
            f"anchor has {anchor_flat.size} entries, parameters have {params.flat.size}"
        )
    diff = params.flat - anchor_flat
    return float(lam / n_train * np.dot(diff, diff))


def total_loss(x, outputs: dict, params: ParameterSet, anchor_flat: np.ndarray,
               lam: float, n_train: int) -> float:
    """Likelihood loss plus anchor penalty; the quantity training minimizes."""
    return gaussian_nll(x, outputs["mean"], outputs["log_var"]) + anchor_penalty(
        params, anchor_flat, lam, n_train)


# ---------------------------------------------------------------------------
# anchors

@dataclass
class AnchorSet:
    """Frozen per-member anchor values plus the prior they were drawn from."""

    members: list[np.ndarray]
    prior_mean: float
    prior_std: tuple[float, ...]  # per layer, weights only (bias prior is a point mass at 0)

    def __post_init__(self):
        for arr in self.members:
            arr.setflags(write=False)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in self.members:
            h.update(arr.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class TrainConfig:
    m: int = 10
    lam: float = 0.01
    epochs: int = 150
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    anchor_std_scale: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"ensemble size must be >= 1, got {self.m}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.anchor_std_scale < 0:
            raise ConfigError(f"anchor_std_scale must be >= 0, got {self.anchor_std_scale}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")


def sample_anchors(spec: NetworkSpec, config: TrainConfig, seed: int) -> AnchorSet:
    """Draw one frozen anchor vector per member from the init distribution.

    Weights: N(0, (anchor_std_scale * sqrt(2/fan_in))^2), biases anchored
    at 0.  Member draws use distinct sub-seeds of `seed`.
    """
    std_flat = init_std(spec) * config.anchor_std_scale
    members = []
    for j in range(config.m):
        rng = np.random.default_rng(derive_seed(seed, j, SEED_ANCHOR))
        members.append(rng.normal(0.0, 1.0, spec.total_count) * std_flat)
    per_layer = tuple(config.anchor_std_scale * np.sqrt(2.0 / i)
                      for _, i in spec.layer_shapes())
    return AnchorSet(members, 0.0, per_layer)


# ---------------------------------------------------------------------------
# training

@dataclass
class EnsembleModel:
    spec: NetworkSpec
    members: list[ParameterSet]
    anchors: AnchorSet
    lam: float
    train_config: TrainConfig
    scaler: ScalerParams | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.members)


def train_member(train, spec: NetworkSpec, config: TrainConfig,
                 anchors: AnchorSet, member_index: int):
    """Train one member by minibatch descent on its anchored objective.

    Deterministic given (config.seed, member_index): init, anchor and the
    per-epoch shuffles all come from derived sub-seeds.  Returns
    (ParameterSet, per-epoch mean loss trace).
    """
    train = as_matrix(train, cols=spec.input_dim, name="train")
    n = train.shape[0]
    if n < config.batch_size:
        raise ConfigError(
            f"batch_size {config.batch_size} exceeds training set size {n}")
    anchor_flat = anchors.members[member_index]
    params = init_params(spec, derive_seed(config.seed, member_index, SEED_INIT))
    state = OptimizerState.for_params(params, learning_rate=config.learning_rate)
    shuffle_rng = np.random.default_rng(
        derive_seed(config.seed, member_index, SEED_SHUFFLE))
    loss_spec = LossSpec(anchor_flat=anchor_flat, lam=config.lam, n_train=n)

    trace = []
    n_batches = (n + config.batch_size - 1) // config.batch_size
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for k in range(n_batches):
            batch = train[order[k * config.batch_size: (k + 1) * config.batch_size]]
            try:
                loss, grads = backward(params, batch, loss_spec)
            except NumericError as exc:
                raise TrainingError(
                    f"member {member_index}: non-finite loss at epoch {epoch} "
                    f"step {k}: {exc}") from exc
            params, state = adam_step(params, grads, state)
            epoch_loss += loss
        trace.append(epoch_loss / n_batches)
    return params, trace


def train_ensemble(train, spec: NetworkSpec, config: TrainConfig,
                   jobs: int = 1) -> EnsembleModel:
    """Train all members independently; the result does not depend on `jobs`."""
    train = as_matrix(train, cols=spec.input_dim, name="train")
    anchors = sample_anchors(spec, config, config.seed)

    def run(j):
        try:
            return train_member(train, spec, config, anchors, j)
        except TrainingError:
            raise
        except Exception as exc:  # pragma: no cover - defensive
            raise TrainingError(f"member {j} failed: {exc}") from exc

    if jobs > 1 and config.m > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, range(config.m)))
    else:
        results = [run(j) for j in range(config.m)]

    members = [params for params, _ in results]
    traces = [trace for _, trace in results]
    metadata = {
        "seed": config.seed,
        "epochs": config.epochs,
        "n_train": int(train.shape[0]),
        "loss_traces": traces,
        "member_seeds": [derive_seed(config.seed, j, SEED_INIT)
                         for j in range(config.m)],
    }
    return EnsembleModel(spec, members, anchors, config.lam, config, None, metadata)


# ---------------------------------------------------------------------------
# prediction

@dataclass
class PredictionRecord:
    """Ensemble outputs for one input vector, per feature plus scalar summaries.

    Scalars are means over the feature axis so values stay comparable across
    input widths.  Reconstruction loss is measured against the ensemble-mean
    reconstruction; epistemic variance divides by the member count M.
    """

    mean: np.ndarray            # per-feature ensemble-mean reconstruction
    epistemic_var: np.ndarray   # per-feature across-member variance
    aleatoric_var: np.ndarray   # per-feature mean of exp(log_var)
    recon_loss: float
    epistemic: float
    aleatoric: float


_PREDICT_CHUNK = 256


def predict(model: EnsembleModel, x) -> list[PredictionRecord]:
    """Score each row of x with the ensemble."""
    x = as_matrix(x, cols=model.spec.input_dim)
    records = []
    for start in range(0, x.shape[0], _PREDICT_CHUNK):
        chunk = x[start: start + _PREDICT_CHUNK]
        means = np.stack([forward(p, chunk)["mean"] for p in model.members])
        log_vars = np.stack([forward(p, chunk)["log_var"] for p in model.members])
        ens_mean = means.mean(axis=0)
        epi = np.mean((means - ens_mean) ** 2, axis=0)  # divide by M
        ale = np.mean(np.exp(log_vars), axis=0)
        sq = (chunk - ens_mean) ** 2
        for i in range(chunk.shape[0]):
            records.append(PredictionRecord(
                mean=ens_mean[i],
                epistemic_var=epi[i],
                aleatoric_var=ale[i],
                recon_loss=float(sq[i].mean()),
                epistemic=float(epi[i].mean()),
                aleatoric=float(ale[i].mean()),
            ))
    return records


# ---------------------------------------------------------------------------
# persistence

def save_model(model: EnsembleModel, path: str):
    """Write the full model as one versioned JSON document.

    Floats are serialized with shortest round-trip decimal representation,
    so loading reproduces every parameter bit for bit.
    """
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "network": {
            "layer_widths": list(model.spec.layer_widths),
            "hidden_activation": model.spec.hidden_activation,
        },
        "lambda": model.lam,
        "train_config": {
            "m": model.train_config.m,
            "lam": model.train_config.lam,
            "epochs": model.train_config.epochs,
            "batch_size": model.train_config.batch_size,
            "learning_rate": model.train_config.learning_rate,
            "seed": model.train_config.seed,
            "anchor_std_scale": model.train_config.anchor_std_scale,
        },
        "anchor_prior": {
            "mean": model.anchors.prior_mean,
            "per_layer_std": list(model.anchors.prior_std),
        },
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
        "metadata": model.metadata,
        "anchors": [a.tolist() for a in model.anchors.members],
        "members": [p.flat.tolist() for p in model.members],
    }
    write_text(path, json.dumps(doc))


def load_model(path: str) -> EnsembleModel:
    """Read a model written by save_model; errors name the file and cause."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise PersistenceError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PersistenceError(
            f"model file {path} is corrupt or truncated: {exc}") from exc

    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise PersistenceError(f"{path} is not a {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_VERSION:
        raise PersistenceError(
            f"{path} has incompatible version {doc.get('version')!r}, "
            f"this build reads version {MODEL_VERSION}")
    try:
        spec = NetworkSpec(tuple(doc["network"]["layer_widths"]),
                           doc["network"]["hidden_activation"])
        tc = doc["train_config"]
        config = TrainConfig(m=tc["m"], lam=tc["lam"], epochs=tc["epochs"],
                             batch_size=tc["batch_size"],
                             learning_rate=tc["learning_rate"], seed=tc["seed"],
                             anchor_std_scale=tc["anchor_std_scale"])
        anchors = AnchorSet(
            [np.asarray(a, dtype=np.float64) for a in doc["anchors"]],
            doc["anchor_prior"]["mean"],
            tuple(doc["anchor_prior"]["per_layer_std"]))
        members = [ParameterSet.from_flat(spec, np.asarray(p, dtype=np.float64))
                   for p in doc["members"]]
        scaler = (ScalerParams.from_dict(doc["scaler"])
                  if doc.get("scaler") is not None else None)
        metadata = doc.get("metadata", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistenceError(f"model file {path} is missing fields: {exc}") from exc
    return EnsembleModel(spec, members, anchors, doc["lambda"], config,
                         scaler, metadata)
