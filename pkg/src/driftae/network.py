"""Dense feed-forward autoencoder machinery: init, forward, reverse-mode
gradients and an adaptive-moment optimizer, all on plain float64 numpy.

The network topology is fixed: a stack of activated hidden layers (the
bottleneck is the narrowest hidden layer) followed by two linear output
heads of input width -- one for the reconstruction mean, one for the
per-feature log variance.  The log-variance head is clamped to
[LOG_VAR_MIN, LOG_VAR_MAX] so the likelihood term 1/(2*sigma^2) cannot
explode early in training.

Parameters live in one flat float64 vector; per-layer weight/bias views are
zero-copy reshapes of slices.  That keeps the optimizer, anchor penalty,
finite-difference checking and serialization trivial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NumericError

LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 10.0
LEAKY_SLOPE = 0.01

ACTIVATIONS = ("relu", "leaky_relu", "tanh")

# purpose tags for derived sub-seeds, see derive_seed()
SEED_INIT = 0
SEED_ANCHOR = 1
SEED_SHUFFLE = 2
SEED_SPLIT = 3
SEED_SYNTH = 4
SEED_NOISE = 5
SEED_KMEANS = 6


def derive_seed(*keys: int) -> int:
    """Mix integer keys into one reproducible 64-bit seed."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, np.uint64)[0])


def as_matrix(x, cols: int | None = None, name: str = "x") -> np.ndarray:
    """Validate a 2-D float64 batch-of-rows array; optionally pin the width."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D (batch x features), got ndim={arr.ndim}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    return arr


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths (input first, reconstruction width last) plus activation.

    The final width doubles as the width of both output heads; the entry
    before it is the last hidden layer feeding them.
    """

    layer_widths: tuple[int, ...]
    hidden_activation: str = "leaky_relu"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 3:
            raise ConfigError("network needs at least one hidden layer between input and output")
        if any(w <= 0 for w in widths):
            raise ConfigError(f"zero-width layer in {widths}")
        if widths[0] != widths[-1]:
            raise ConfigError(
                f"input width {widths[0]} and reconstruction width {widths[-1]} must match"
            )
        if self.hidden_activation not in ACTIVATIONS:
            raise ConfigError(
                f"unknown activation {self.hidden_activation!r}, pick one of {ACTIVATIONS}"
            )

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def output_heads(self) -> dict[str, int]:
        d = self.layer_widths[-1]
        return {"mean": d, "log_variance": d}

    @property
    def bottleneck_index(self) -> int:
        """Index (into layer_widths) of the narrowest hidden layer."""
        hidden = self.layer_widths[1:-1]
        return 1 + int(np.argmin(hidden))

    @property
    def latent_dim(self) -> int:
        return self.layer_widths[self.bottleneck_index]

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(out, in) weight shapes: hidden stack, then mean head, then log-var head."""
        w = self.layer_widths
        trunk = [(w[i + 1], w[i]) for i in range(len(w) - 2)]
        last_hidden = w[-2]
        d = w[-1]
        return trunk + [(d, last_hidden), (d, last_hidden)]

    @property
    def n_trunk(self) -> int:
        return len(self.layer_widths) - 2

    def fan_ins(self) -> list[int]:
        return [shape[1] for shape in self.layer_shapes()]

    @property
    def total_count(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes())


@dataclass
class ParameterSet:
    """All weights and biases of one autoencoder, stored flat.

    Layout: for each layer in NetworkSpec.layer_shapes() order, the weight
    matrix (row-major) followed by its bias vector.
    """

    spec: NetworkSpec
    flat: np.ndarray

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64).ravel()
        if self.flat.size != self.spec.total_count:
            raise DimensionError(
                f"flat parameter vector has {self.flat.size} entries, "
                f"spec requires {self.spec.total_count}"
            )

    @property
    def total_count(self) -> int:
        return self.flat.size

    def _offsets(self) -> list[tuple[int, int, int]]:
        """(weight_start, bias_start, bias_end) per layer."""
        out = []
        pos = 0
        for o, i in self.spec.layer_shapes():
            w0 = pos
            b0 = pos + o * i
            pos = b0 + o
            out.append((w0, b0, pos))
        return out

    def weight(self, layer: int) -> np.ndarray:
        w0, b0, _ = self._offsets()[layer]
        o, i = self.spec.layer_shapes()[layer]
        return self.flat[w0:b0].reshape(o, i)

    def bias(self, layer: int) -> np.ndarray:
        _, b0, b1 = self._offsets()[layer]
        return self.flat[b0:b1]

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.spec, self.flat.copy())

    def flatten(self) -> np.ndarray:
        return self.flat.copy()

    @classmethod
    def from_flat(cls, spec: NetworkSpec, flat: np.ndarray) -> "ParameterSet":
        return cls(spec, np.array(flat, dtype=np.float64))


def init_std(spec: NetworkSpec) -> np.ndarray:
    """Per-entry init/prior std: sqrt(2 / fan_in) for weights, 0 left to biases."""
    std = np.zeros(spec.total_count)
    pos = 0
    for o, i in spec.layer_shapes():
        std[pos : pos + o * i] = np.sqrt(2.0 / i)
        pos += o * i + o  # biases stay 0
    return std


def init_params(spec: NetworkSpec, seed: int) -> ParameterSet:
    """Gaussian weights with std sqrt(2/fan_in), zero biases, deterministic."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(spec.total_count)
    pos = 0
    for o, i in spec.layer_shapes():
        n = o * i
        flat[pos : pos + n] = rng.normal(0.0, np.sqrt(2.0 / i), size=n)
        pos += n + o
    return ParameterSet(spec, flat)


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "leaky_relu":
        return np.where(z > 0.0, z, LEAKY_SLOPE * z)
    return np.tanh(z)


def _act_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "leaky_relu":
        return np.where(z > 0.0, 1.0, LEAKY_SLOPE)
    return 1.0 - a * a


def _forward_trunk(params: ParameterSet, x: np.ndarray):
    """Run the hidden stack; returns (activations per layer incl. input, pre-activations)."""
    acts = [x]
    pres = []
    a = x
    kind = params.spec.hidden_activation
    for layer in range(params.spec.n_trunk):
        z = a @ params.weight(layer).T + params.bias(layer)
        a = _act(z, kind)
        pres.append(z)
        acts.append(a)
    return acts, pres


def forward(params: ParameterSet, x) -> dict[str, np.ndarray]:
    """Full forward pass.

    Returns {"mean": BxD, "log_var": BxD clamped to [-10, 10], "latent": BxL}.
    """
    spec = params.spec
    x = as_matrix(x, cols=spec.input_dim)
    acts, _ = _forward_trunk(params, x)
    last = acts[-1]
    t = spec.n_trunk
    mean = last @ params.weight(t).T + params.bias(t)
    raw_lv = last @ params.weight(t + 1).T + params.bias(t + 1)
    log_var = np.clip(raw_lv, LOG_VAR_MIN, LOG_VAR_MAX)
    latent = acts[spec.bottleneck_index]
    if x.shape[0] and not (np.isfinite(mean).all() and np.isfinite(latent).all()):
        raise NumericError("forward pass produced non-finite outputs")
    return {"mean": mean, "log_var": log_var, "latent": latent}


@dataclass(frozen=True)
class LossSpec:
    """Descriptor of the training objective: heteroscedastic Gaussian negative
    log-likelihood plus an optional squared pull toward fixed anchor values.

    anchor_flat is a ParameterSet-shaped flat vector; lam scales the pull and
    n_train normalizes it (lam/n_train per squared deviation).
    """

    anchor_flat: np.ndarray | None = None
    lam: float = 0.0
    n_train: int = 1

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.n_train < 1:
            raise ConfigError(f"n_train must be >= 1, got {self.n_train}")


def _nll_terms(x, mean, log_var):
    # per-sample sum over features, averaged over the batch
    b = x.shape[0]
    inv_var = np.exp(-log_var)
    sq = (x - mean) ** 2
    return float(np.sum(sq * inv_var * 0.5 + 0.5 * log_var) / b)


def backward(params: ParameterSet, x, loss: LossSpec):
    """Loss value and exact reverse-mode gradients for every parameter.

    Returns (loss: float, grads: ParameterSet) with grads in the same flat
    layout as params.
    """
    spec = params.spec
    x = as_matrix(x, cols=spec.input_dim)
    b = x.shape[0]
    if b == 0:
        raise DimensionError("cannot compute a training loss on an empty batch")

    acts, pres = _forward_trunk(params, x)
    last = acts[-1]
    t = spec.n_trunk
    mean = last @ params.weight(t).T + params.bias(t)
    raw_lv = last @ params.weight(t + 1).T + params.bias(t + 1)
    log_var = np.clip(raw_lv, LOG_VAR_MIN, LOG_VAR_MAX)

    nll = _nll_terms(x, mean, log_var)
    anchor_term = 0.0
    if loss.anchor_flat is not None and loss.lam > 0.0:
        diff = params.flat - loss.anchor_flat
        anchor_term = float(loss.lam / loss.n_train * np.dot(diff, diff))
    total = nll + anchor_term
    if not np.isfinite(total):
        raise NumericError(
            f"non-finite loss (likelihood={nll!r}, anchor={anchor_term!r})"
        )

    grads = np.zeros_like(params.flat)
    gview = ParameterSet(spec, grads)  # shares the buffer

    inv_var = np.exp(-log_var)
    d_mean = (mean - x) * inv_var / b
    d_lv = (0.5 - 0.5 * (x - mean) ** 2 * inv_var) / b
    in_range = (raw_lv > LOG_VAR_MIN) & (raw_lv < LOG_VAR_MAX)
    d_raw_lv = np.where(in_range, d_lv, 0.0)

    gview.weight(t)[...] = d_mean.T @ last
    gview.bias(t)[...] = d_mean.sum(axis=0)
    gview.weight(t + 1)[...] = d_raw_lv.T @ last
    gview.bias(t + 1)[...] = d_raw_lv.sum(axis=0)

    delta = d_mean @ params.weight(t) + d_raw_lv @ params.weight(t + 1)
    kind = spec.hidden_activation
    for layer in range(t - 1, -1, -1):
        dz = delta * _act_grad(pres[layer], acts[layer + 1], kind)
        gview.weight(layer)[...] = dz.T @ acts[layer]
        gview.bias(layer)[...] = dz.sum(axis=0)
        if layer > 0:
            delta = dz @ params.weight(layer)

    if loss.anchor_flat is not None and loss.lam > 0.0:
        grads += (2.0 * loss.lam / loss.n_train) * (params.flat - loss.anchor_flat)

    return total, ParameterSet(spec, grads)


@dataclass
class OptimizerState:
    """Adaptive-moment accumulators for one ParameterSet."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ParameterSet, learning_rate: float = 1e-3,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        n = params.total_count
        return cls(np.zeros(n), np.zeros(n), 0, learning_rate, beta1, beta2, eps)


def adam_step(params: ParameterSet, grads: ParameterSet, state: OptimizerState):
    """One bias-corrected adaptive-moment update; returns (params, state) new objects."""
    if grads.flat.shape != params.flat.shape or state.m.shape != params.flat.shape:
        raise DimensionError("optimizer state / gradient shape does not match parameters")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads.flat
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads.flat**2
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_flat = params.flat - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = OptimizerState(m, v, t, state.learning_rate, state.beta1,
                               state.beta2, state.eps)
    return ParameterSet(params.spec, new_flat), new_state
