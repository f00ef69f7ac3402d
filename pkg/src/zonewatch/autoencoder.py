"""From-scratch feedforward autoencoder in numpy.

Mirrored dense layers around a bottleneck, nonlinear hidden units, linear
output. Training is plain mini-batch gradient descent with early stopping
on a held-out optimization set; gradients are exact analytic backprop and
can be cross-checked against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivergedError, InsufficientDataError, ValidationError
from .rng import Rng

__all__ = [
    "Architecture", "Normalizer", "AutoencoderModel", "TrainConfig",
    "TrainResult", "default_layer_sizes", "init_model", "forward", "mse",
    "reconstruction_errors", "backward", "batch_loss", "train",
    "finite_diff_gradients", "best_epoch", "save_model", "load_model",
]

_ACTIVATIONS = ("tanh", "relu")

DEFAULT_COMPRESSION_RATIOS = (0.75, 0.5, 0.33, 0.25)


def default_layer_sizes(input_dim: int,
                        ratios=DEFAULT_COMPRESSION_RATIOS) -> tuple:
    """Mirrored layer sizes from compression ratios of the input width."""
    down = [max(1, round(input_dim * r)) for r in ratios]
    return tuple([input_dim] + down + down[-2::-1] + [input_dim])


@dataclass(frozen=True)
class Architecture:
    layer_sizes: tuple
    activation: tuple  # one name per hidden layer

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ValidationError("architecture needs at least 3 layers")
        if any(s < 1 for s in sizes):
            raise ValidationError("layer sizes must be positive")
        if sizes != sizes[::-1]:
            raise ValidationError(f"layer sizes must be symmetric, got {sizes}")
        if min(sizes) >= sizes[0]:
            raise ValidationError("bottleneck must be narrower than the input layer")
        acts = self.activation
        if isinstance(acts, str):
            acts = (acts,) * (len(sizes) - 2)
        acts = tuple(acts)
        object.__setattr__(self, "activation", acts)
        if len(acts) != len(sizes) - 2:
            raise ValidationError(
                f"need {len(sizes) - 2} hidden activations, got {len(acts)}"
            )
        for name in acts:
            if name not in _ACTIVATIONS:
                raise ValidationError(f"unknown activation {name!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]


@dataclass(frozen=True)
class Normalizer:
    """Per-feature z-scoring with the training set's statistics."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Normalizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std == 0.0, 1.0, std)  # constant features pass through
        return cls(mean, std)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) * self.std + self.mean


@dataclass
class AutoencoderModel:
    weights: list           # weights[i]: (sizes[i], sizes[i+1])
    biases: list            # biases[i]: (sizes[i+1],)
    architecture: Architecture
    normalizer: Optional[Normalizer] = None

    def copy(self) -> "AutoencoderModel":
        return AutoencoderModel(
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.architecture,
            self.normalizer,
        )


@dataclass(frozen=True)
class TrainConfig:
    lr_n: float = 0.01
    epochs: int = 60
    batch_size: int = 32
    seed: int = 0
    patience: int = 5

    def __post_init__(self):
        if self.lr_n <= 0:
            raise ValidationError(f"lr_n must be > 0, got {self.lr_n}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience < 1:
            raise ValidationError(f"patience must be >= 1, got {self.patience}")


def init_model(arch: Architecture, seed) -> AutoencoderModel:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = Rng.coerce(seed)
    sizes = arch.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return AutoencoderModel(weights, biases, arch)


def _activate(name: str, Z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(Z)
    return np.maximum(Z, 0.0)  # relu


def _activate_grad(name: str, A: np.ndarray) -> np.ndarray:
    # derivative expressed through the activation value
    if name == "tanh":
        return 1.0 - A * A
    return (A > 0.0).astype(np.float64)


def _forward_pass(model: AutoencoderModel, X: np.ndarray):
    """All layer activations; activations[0] is the input."""
    acts = [X]
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        Z = acts[-1] @ W + b
        acts.append(Z if i == last else _activate(model.architecture.activation[i], Z))
    return acts


def _as_batch(model: AutoencoderModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != model.architecture.input_dim:
        raise ValidationError(
            f"input has {X.shape[-1]} features, model expects "
            f"{model.architecture.input_dim}"
        )
    return X


def forward(model: AutoencoderModel, x) -> np.ndarray:
    """Reconstruct already-normalized input; pure function of (model, x)."""
    X = np.asarray(x, dtype=np.float64)
    out = _forward_pass(model, _as_batch(model, X))[-1]
    return out[0] if X.ndim == 1 else out


def mse(x, xhat) -> float:
    x = np.asarray(x, dtype=np.float64)
    xhat = np.asarray(xhat, dtype=np.float64)
    if x.shape != xhat.shape:
        raise ValidationError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    d = x - xhat
    return float(np.mean(d * d))


def reconstruction_errors(model: AutoencoderModel, X) -> np.ndarray:
    """Per-row MSE between normalized input and its reconstruction."""
    X = _as_batch(model, X)
    R = _forward_pass(model, X)[-1] - X
    return (R * R).mean(axis=1)


def batch_loss(model: AutoencoderModel, batch) -> float:
    """Mean of per-row MSE over the batch (the training objective)."""
    return float(reconstruction_errors(model, batch).mean())


def backward(model: AutoencoderModel, batch):
    """Analytic gradients of the batch-mean MSE.

    Returns (weight_grads, bias_grads) shaped like the parameters.
    """
    X = _as_batch(model, batch)
    if X.shape[0] == 0:
        raise InsufficientDataError("backward needs a non-empty batch")
    acts = _forward_pass(model, X)
    m, d = X.shape
    delta = 2.0 * (acts[-1] - X) / (m * d)
    weight_grads = [None] * len(model.weights)
    bias_grads = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        weight_grads[i] = acts[i].T @ delta
        bias_grads[i] = delta.sum(axis=0)
        if i > 0:
            grad = _activate_grad(model.architecture.activation[i - 1], acts[i])
            delta = (delta @ model.weights[i].T) * grad
    return weight_grads, bias_grads


def finite_diff_gradients(model: AutoencoderModel, batch, h: float = 1e-5):
    """Central-difference gradients of the same objective.

    Touches only forward passes, so it is an independent check on backward().
    """
    weight_grads, bias_grads = [], []
    for params, grads in ((model.weights, weight_grads), (model.biases, bias_grads)):
        for P in params:
            G = np.zeros_like(P)
            it = np.nditer(P, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = P[idx]
                P[idx] = orig + h
                hi = batch_loss(model, batch)
                P[idx] = orig - h
                lo = batch_loss(model, batch)
                P[idx] = orig
                G[idx] = (hi - lo) / (2.0 * h)
            grads.append(G)
    return weight_grads, bias_grads


def best_epoch(history, initial: float) -> int:
    """Index of the best optimization-set MSE; 0 means the untrained model,
    k means after epoch k."""
    best, best_val = 0, initial
    for i, v in enumerate(history, start=1):
        if v < best_val:
            best, best_val = i, v
    return best


@dataclass
class TrainResult:
    model: AutoencoderModel
    history: list           # optimization-set MSE after each epoch
    initial_opt_mse: float
    best_epoch: int         # 0 = initial parameters
    epochs_run: int


def train(model: AutoencoderModel, train_set, opt_set,
          config: TrainConfig) -> TrainResult:
    """Mini-batch gradient descent with early stopping.

    Both datasets must already be normalized with the model's normalizer.
    Stops once the optimization-set MSE has not improved for `patience`
    epochs and returns the parameters from the best epoch.
    """
    T = _as_batch(model, np.asarray(train_set, dtype=np.float64))
    O = _as_batch(model, np.asarray(opt_set, dtype=np.float64))
    if T.shape[0] == 0 or O.shape[0] == 0:
        raise InsufficientDataError("train and optimization sets must be non-empty")

    rng = Rng(config.seed)
    work = model.copy()
    initial = batch_loss(work, O)
    divergence_cap = 1e3 * max(initial, 1e-12)

    best = work.copy()
    best_val = initial
    best_ep = 0
    since_best = 0
    history = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(T.shape[0])
        for start in range(0, T.shape[0], config.batch_size):
            batch = T[order[start:start + config.batch_size]]
            wg, bg = backward(work, batch)
            for W, g in zip(work.weights, wg):
                W -= config.lr_n * g
            for b, g in zip(work.biases, bg):
                b -= config.lr_n * g
        opt_mse = batch_loss(work, O)
        history.append(opt_mse)
        if not np.isfinite(opt_mse) or opt_mse > divergence_cap:
            raise DivergedError(
                f"optimization-set MSE {opt_mse:.3g} exceeded "
                f"{divergence_cap:.3g} (1000 x initial); try a smaller lr_n"
            )
        if opt_mse < best_val:
            best = work.copy()
            best_val = opt_mse
            best_ep = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    return TrainResult(best, history, initial, best_ep, len(history))


_MODEL_FORMAT_VERSION = 1


def save_model(path, model: AutoencoderModel, extra: Optional[dict] = None) -> None:
    """Write a self-describing container that round-trips bit-exactly."""
    if model.normalizer is None:
        raise ValidationError("cannot save a model without a fitted normalizer")
    payload = {
        "format_version": np.int64(_MODEL_FORMAT_VERSION),
        "layer_sizes": np.asarray(model.architecture.layer_sizes, dtype=np.int64),
        "activation": np.asarray(model.architecture.activation),
        "norm_mean": model.normalizer.mean,
        "norm_std": model.normalizer.std,
    }
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        payload[f"w{i}"] = W
        payload[f"b{i}"] = b
    for key, value in (extra or {}).items():
        payload[f"x_{key}"] = np.asarray(value)
    np.savez(path, **payload)


def load_model(path):
    """Returns (model, extra) saved by save_model."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != _MODEL_FORMAT_VERSION:
            raise ValidationError(f"unsupported model file version {version}")
        sizes = tuple(int(s) for s in data["layer_sizes"])
        arch = Architecture(sizes, tuple(str(a) for a in data["activation"]))
        normalizer = Normalizer(data["norm_mean"], data["norm_std"])
        weights = [data[f"w{i}"] for i in range(len(sizes) - 1)]
        biases = [data[f"b{i}"] for i in range(len(sizes) - 1)]
        extra = {
            key[2:]: data[key] for key in data.files if key.startswith("x_")
        }
    return AutoencoderModel(weights, biases, arch, normalizer), extra
