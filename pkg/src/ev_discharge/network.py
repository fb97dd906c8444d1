"""Small fully-connected regressor with hand-written backprop, Adam and early stopping."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .features import FEATURE_NAMES, StandardizationStats
from .seeding import make_rng

MODEL_FORMAT_VERSION = 1
DEFAULT_DIMS = (len(FEATURE_NAMES), 64, 32, 16, 1)


class TrainingDivergedError(RuntimeError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass
class ResidualNet:
    """Dense layers ``x @ W + b``; hidden layers use ``activation``, the last is linear.

    ``dropout_layers`` indexes hidden layers (0-based) whose activations are
    dropped during training. The prediction is multiplied by ``output_scale``.
    """

    weights: list
    biases: list
    activation: str = "relu"
    dropout: float = 0.2
    dropout_layers: tuple = (1, 2)
    output_scale: float = 1.0

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "ResidualNet":
        return copy.deepcopy(self)

    def weight_norm(self) -> float:
        return math.sqrt(sum(float(np.sum(w * w)) for w in self.weights))

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "activation": self.activation,
            "dropout": self.dropout,
            "dropout_layers": list(self.dropout_layers),
            "output_scale": self.output_scale,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResidualNet":
        net = cls(
            weights=[np.asarray(w, dtype=float) for w in d["weights"]],
            biases=[np.asarray(b, dtype=float) for b in d["biases"]],
            activation=d.get("activation", "relu"),
            dropout=d.get("dropout", 0.2),
            dropout_layers=tuple(d.get("dropout_layers", (1, 2))),
            output_scale=d.get("output_scale", 1.0),
        )
        if list(net.dims) != list(d["dims"]):
            raise ConfigurationError(f"stored dims {d['dims']} do not match weights {net.dims}")
        return net


def init_network(
    dims: Sequence[int] = DEFAULT_DIMS,
    rng: Optional[np.random.Generator] = None,
    *,
    activation: str = "relu",
    dropout: float = 0.2,
    dropout_layers: Sequence[int] = (1, 2),
    output_scale: float = 1.0,
) -> ResidualNet:
    """He-normal hidden layers, zero output layer (an untrained net predicts 0)."""
    rng = rng if rng is not None else np.random.default_rng(0)
    weights, biases = [], []
    for i, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
        if i == len(dims) - 2:
            weights.append(np.zeros((n_in, n_out)))
        else:
            weights.append(rng.normal(0.0, math.sqrt(2.0 / n_in), (n_in, n_out)))
        biases.append(np.zeros(n_out))
    return ResidualNet(weights, biases, activation, dropout, tuple(dropout_layers), output_scale)


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else z


def _act_grad(z, kind):
    return (z > 0).astype(float) if kind == "relu" else np.ones_like(z)


def dropout_masks(net: ResidualNet, n_rows: int, rng: np.random.Generator) -> dict:
    keep = 1.0 - net.dropout
    masks = {}
    for layer in net.dropout_layers:
        width = net.weights[layer].shape[1]
        masks[layer] = (rng.random((n_rows, width)) < keep) / keep
    return masks


def _forward_cache(net: ResidualNet, X: np.ndarray, masks: Optional[dict]):
    acts = [X]
    pre = []
    h = X
    n_hidden = len(net.weights) - 1
    for i in range(n_hidden):
        z = h @ net.weights[i] + net.biases[i]
        h = _act(z, net.activation)
        if masks and i in masks:
            h = h * masks[i]
        pre.append(z)
        acts.append(h)
    out = (h @ net.weights[-1] + net.biases[-1])[:, 0] * net.output_scale
    return out, acts, pre


def forward(
    net: ResidualNet,
    X: np.ndarray,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Predicted residual (kWh) for each row of ``X``. Dropout only when ``training``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    masks = None
    if training and net.dropout > 0:
        if rng is None:
            raise ValueError("training-mode forward needs an rng for dropout")
        masks = dropout_masks(net, X.shape[0], rng)
    return _forward_cache(net, X, masks)[0]


def loss(net: ResidualNet, X: np.ndarray, y: np.ndarray, weight_decay: float = 1e-4) -> float:
    """Mean squared error plus ``weight_decay`` times the squared norm of the weights (not biases)."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValueError("loss of an empty batch is undefined")
    err = forward(net, X) - y
    return float(np.mean(err * err)) + weight_decay * net.weight_norm() ** 2


def loss_and_grad(
    net: ResidualNet,
    X: np.ndarray,
    y: np.ndarray,
    weight_decay: float = 1e-4,
    masks: Optional[dict] = None,
):
    """Loss and gradients, ordered like :meth:`ResidualNet.parameters`."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    out, acts, pre = _forward_cache(net, X, masks)
    err = out - y
    value = float(np.mean(err * err)) + weight_decay * net.weight_norm() ** 2

    delta = (2.0 / n * err * net.output_scale)[:, None]
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta + 2.0 * weight_decay * net.weights[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ net.weights[i].T
            if masks and (i - 1) in masks:
                delta = delta * masks[i - 1]
            delta = delta * _act_grad(pre[i - 1], net.activation)
    return value, [g for pair in zip(grads_w, grads_b) for g in pair]


def gradient_check(
    net: ResidualNet,
    X: np.ndarray,
    y: np.ndarray,
    weight_decay: float = 1e-4,
    *,
    h: float = 1e-5,
    fraction: float = 0.05,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Max relative error between backprop and central differences over a random parameter sample."""
    rng = rng if rng is not None else np.random.default_rng(0)
    _, grads = loss_and_grad(net, X, y, weight_decay)
    worst = 0.0
    for param, grad in zip(net.parameters(), grads):
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        k = max(1, int(math.ceil(fraction * flat.size)))
        for j in rng.choice(flat.size, size=k, replace=False):
            orig = flat[j]
            flat[j] = orig + h
            up = loss(net, X, y, weight_decay)
            flat[j] = orig - h
            down = loss(net, X, y, weight_decay)
            flat[j] = orig
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric) + abs(gflat[j]), 1e-12)
            worst = max(worst, abs(numeric - gflat[j]) / denom)
    return worst


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-3
    decay_rate: float = 0.95
    decay_every: int = 50
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    dropout: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0 or self.batch_size < 1 or self.max_epochs < 1 or self.decay_every < 1:
            raise ValueError("lr0, batch_size, max_epochs and decay_every must be positive")
        if self.patience < 0 or self.patience >= self.max_epochs:
            raise ValueError("patience must satisfy 0 <= patience < max_epochs")
        if self.weight_decay < 0 or not 0.0 <= self.dropout < 1.0:
            raise ValueError("weight_decay must be >= 0 and dropout in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def learning_rate(self, epoch: int) -> float:
        return self.lr0 * self.decay_rate ** (epoch // self.decay_every)


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = -1
    early_stopped: bool = False

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch]

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
            for row in zip(self.epochs, self.train_loss, self.val_loss, self.lr):
                writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def _mse(net, X, y) -> float:
    err = forward(net, X) - y
    return float(np.mean(err * err))


def train(
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    config: TrainConfig = TrainConfig(),
    *,
    dims: Optional[Sequence[int]] = None,
    net: Optional[ResidualNet] = None,
    output_scale: Optional[float] = None,
) -> tuple[ResidualNet, TrainingLog]:
    """Mini-batch Adam with step-decayed learning rate and early stopping on validation MSE.

    Returns the snapshot with the lowest validation loss. Unless a ``net`` is
    passed, the output scale defaults to the std of ``y_train`` so the raw
    network output is O(1).
    """
    X_train = np.asarray(X_train, float)
    y_train = np.asarray(y_train, float)
    X_val = np.asarray(X_val, float)
    y_val = np.asarray(y_val, float)
    if len(y_train) == 0 or len(y_val) == 0:
        raise ValueError("training and validation sets must both be non-empty")

    if net is None:
        dims = tuple(dims) if dims else (X_train.shape[1],) + DEFAULT_DIMS[1:]
        if dims[0] != X_train.shape[1]:
            raise ConfigurationError(f"net input width {dims[0]} != feature width {X_train.shape[1]}")
        if output_scale is None:
            std = float(np.std(y_train))
            output_scale = std if std > 0 else 1.0
        net = init_network(
            dims, make_rng(config.seed, "init"), dropout=config.dropout, output_scale=output_scale
        )
    else:
        net = net.copy()
    shuffle_rng = make_rng(config.seed, "shuffle")
    dropout_rng = make_rng(config.seed, "dropout")
    opt = Adam(net.parameters(), config.lr0, config.beta1, config.beta2, config.eps)

    log = TrainingLog()
    best = net.copy()
    best_val = math.inf
    wait = 0
    n = len(y_train)
    for epoch in range(config.max_epochs):
        opt.lr = config.learning_rate(epoch)
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start: start + config.batch_size]
            masks = dropout_masks(net, len(idx), dropout_rng) if net.dropout > 0 else None
            value, grads = loss_and_grad(net, X_train[idx], y_train[idx], config.weight_decay, masks)
            if not math.isfinite(value):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            opt.step(grads)

        tr = _mse(net, X_train, y_train)
        va = _mse(net, X_val, y_val)
        if not (math.isfinite(tr) and math.isfinite(va)):
            raise TrainingDivergedError(f"non-finite loss at end of epoch {epoch}")
        log.epochs.append(epoch)
        log.train_loss.append(tr)
        log.val_loss.append(va)
        log.lr.append(opt.lr)
        log.stopped_epoch = epoch
        if va < best_val:
            best_val = va
            best = net.copy()
            log.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= max(config.patience, 1):
                log.early_stopped = True
                break
    return best, log


@dataclass
class ResidualModel:
    """A trained net together with the feature columns and scaling it expects."""

    net: ResidualNet
    stats: StandardizationStats
    train_config: Optional[TrainConfig] = None

    @property
    def columns(self) -> tuple[str, ...]:
        return self.stats.columns

    def predict_raw(self, raw: np.ndarray) -> np.ndarray:
        raw = np.atleast_2d(raw)
        if raw.shape[1] != len(FEATURE_NAMES):
            raise ConfigurationError(f"expected {len(FEATURE_NAMES)} raw features, got {raw.shape[1]}")
        X = self.stats.transform(raw)
        if X.shape[1] != self.net.dims[0]:
            raise ConfigurationError(f"model expects {self.net.dims[0]} inputs, features give {X.shape[1]}")
        return forward(self.net, X)

    def to_dict(self) -> dict:
        return {
            "format": "ev-discharge-residual-net",
            "version": MODEL_FORMAT_VERSION,
            "features": self.stats.to_dict(),
            "network": self.net.to_dict(),
            "train_config": self.train_config.to_dict() if self.train_config else None,
            "train_config_hash": self.train_config.digest() if self.train_config else None,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ResidualModel":
        d = json.loads(Path(path).read_text())
        if d.get("format") != "ev-discharge-residual-net":
            raise ConfigurationError(f"{path} is not a residual model file")
        if d.get("version") != MODEL_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported model version {d.get('version')}")
        stats = StandardizationStats.from_dict(d["features"])
        net = ResidualNet.from_dict(d["network"])
        if net.dims[0] != len(stats.columns):
            raise ConfigurationError("network input width does not match stored feature columns")
        cfg = TrainConfig(**d["train_config"]) if d.get("train_config") else None
        return cls(net, stats, cfg)
