"""Feedforward softmax classifier trained with Adam, in plain numpy."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from interjection import CLASSES
from interjection.errors import (CorruptCheckpoint, EmptyTrainingSet, IoFailure, NonFiniteLoss,
                                 ShapeMismatch, UnknownLabel, VersionMismatch)
from interjection.seeding import rng_for

CHECKPOINT_FORMAT = "interjection-fnn"
CHECKPOINT_VERSION = 1
STD_FLOOR = 1e-8


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(z.dtype)


def _tanh_grad(z, a):
    return 1.0 - a * a


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _sigmoid_grad(z, a):
    return a * (1.0 - a)


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
    "sigmoid": (_sigmoid, _sigmoid_grad),
}


@dataclass
class ModelParams:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"
    norm_mean: Optional[np.ndarray] = None
    norm_std: Optional[np.ndarray] = None

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        d = self.layer_sizes[0]
        if self.norm_mean is None:
            self.norm_mean = np.zeros(d)
        if self.norm_std is None:
            self.norm_std = np.ones(d)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_sizes[i], self.layer_sizes[i + 1]) or b.shape != (self.layer_sizes[i + 1],):
                raise ShapeMismatch(f"layer {i} has shapes {w.shape}, {b.shape}")
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise ShapeMismatch("number of layers does not match layer_sizes")

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int], activation: str = "relu") -> "ModelParams":
        sizes = tuple(layer_sizes)
        return cls(sizes, [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]], activation)

    @classmethod
    def init(cls, layer_sizes: Sequence[int], seed: int, activation: str = "relu") -> "ModelParams":
        """He-scaled normal weights, zero biases."""
        rng = rng_for(seed, "init")
        sizes = tuple(layer_sizes)
        weights = [rng.standard_normal((a, b)) * np.sqrt(2.0 / a) for a, b in zip(sizes[:-1], sizes[1:])]
        return cls(sizes, weights, [np.zeros(b) for b in sizes[1:]], activation)

    def arrays(self) -> list[np.ndarray]:
        """Trainable arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "ModelParams":
        return ModelParams(self.layer_sizes, list(arrays[0::2]), list(arrays[1::2]), self.activation,
                           self.norm_mean, self.norm_std)

    def copy(self) -> "ModelParams":
        return ModelParams(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases],
                           self.activation, self.norm_mean.copy(), self.norm_std.copy())


def fit_norm_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and standard deviation; constant columns keep unit scale."""
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return mean, std


def standardize(params: ModelParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.layer_sizes[0]:
        raise ShapeMismatch(f"expected {params.layer_sizes[0]} features per row, got {x.shape[-1]}")
    return (x - params.norm_mean) / np.maximum(params.norm_std, STD_FLOOR)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cache(params: ModelParams, x: np.ndarray):
    act, _ = ACTIVATIONS[params.activation]
    zs, acts = [], [x]
    a = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        zs.append(z)
        a = z if i == last else act(z)
        acts.append(a)
    return zs, acts


def logits(params: ModelParams, x) -> np.ndarray:
    return _forward_cache(params, standardize(params, x))[1][-1]


def forward(params: ModelParams, x) -> np.ndarray:
    """Class probabilities for raw feature rows (or one row)."""
    return softmax(logits(params, x))


def predict(params: ModelParams, x) -> np.ndarray:
    return np.argmax(logits(params, x), axis=-1)


def cross_entropy(logit_rows: np.ndarray, y: np.ndarray) -> float:
    z = logit_rows - logit_rows.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(len(y)), y].mean())


def loss_and_grad(params: ModelParams, x, y) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy and its gradient for each array in ``params.arrays()``."""
    y = np.asarray(y, dtype=np.int64)
    x = standardize(params, x)
    if x.ndim != 2 or len(x) == 0:
        raise ShapeMismatch("batch must be a non-empty 2-D array")
    if len(y) != len(x):
        raise ShapeMismatch(f"{len(x)} rows but {len(y)} labels")
    zs, acts = _forward_cache(params, x)
    out = acts[-1]
    loss = cross_entropy(out, y)
    if not np.isfinite(loss):
        raise NonFiniteLoss("loss is not finite; parameters have diverged")

    _, act_grad = ACTIVATIONS[params.activation]
    delta = softmax(out)
    delta[np.arange(len(y)), y] -= 1.0
    delta /= len(y)
    grads = [None] * (2 * len(params.weights))
    for i in range(len(params.weights) - 1, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * act_grad(zs[i - 1], acts[i])
    return loss, grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 0.009
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, arrays: Sequence[np.ndarray], lr: float = 0.009, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> list[np.ndarray]:
    """One bias-corrected Adam update. Moments in ``state`` are updated in place."""
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ShapeMismatch("parameter, gradient and moment lists differ in length")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(arrays, grads)):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if p.shape != g.shape or p.shape != state.m[i].shape:
            raise ShapeMismatch(f"array {i}: parameter {p.shape}, gradient {g.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        out.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 0.009
    seed: int = 0
    patience: Optional[int] = None
    hidden: tuple[int, ...] = (256, 128, 64)
    activation: str = "relu"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def __len__(self):
        return len(self.train_loss)


def encode_labels(labels, classes: Sequence[str] = CLASSES) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([index[l] for l in labels], dtype=np.int64)
    except KeyError as exc:
        raise UnknownLabel(f"label {exc.args[0]!r} not in {tuple(classes)}") from None


def _evaluate(params, x, y):
    out = _forward_cache(params, standardize(params, x))[1][-1]
    return cross_entropy(out, y), float(np.mean(np.argmax(out, axis=1) == y))


def train(train_x, train_y, val_x=None, val_y=None, cfg: TrainConfig = TrainConfig(),
          n_classes: int = len(CLASSES)) -> tuple[ModelParams, History]:
    """Mini-batch Adam on standardized features.

    Returns the parameters from the epoch with the lowest validation loss
    (training loss when no validation set is given) and the per-epoch history.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    if train_x.ndim != 2 or len(train_x) == 0:
        raise EmptyTrainingSet("training set is empty")
    if len(train_y) != len(train_x):
        raise ShapeMismatch(f"{len(train_x)} rows but {len(train_y)} labels")
    has_val = val_x is not None and len(val_x) > 0
    if has_val:
        val_x = np.asarray(val_x, dtype=np.float64)
        val_y = np.asarray(val_y, dtype=np.int64)

    sizes = (train_x.shape[1],) + cfg.hidden + (n_classes,)
    params = ModelParams.init(sizes, cfg.seed, cfg.activation)
    params.norm_mean, params.norm_std = fit_norm_stats(train_x)
    xs = standardize(params, train_x)
    # the training loop works on pre-standardized rows
    inner = ModelParams(sizes, params.weights, params.biases, cfg.activation)
    state = AdamState.for_params(inner.arrays(), lr=cfg.learning_rate)
    history = History()
    best, best_loss, stale = None, np.inf, 0
    n = len(xs)
    for epoch in range(cfg.epochs):
        order = rng_for(cfg.seed, "shuffle", epoch).permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = loss_and_grad(inner, xs[idx], train_y[idx])
            inner = inner.with_arrays(adam_step(state, inner.arrays(), grads))
        tl, ta = _evaluate(inner, xs, train_y)
        if not np.isfinite(tl):
            raise NonFiniteLoss(f"training loss diverged at epoch {epoch + 1}")
        history.train_loss.append(tl)
        history.train_accuracy.append(ta)
        current = params.with_arrays(inner.arrays())
        if has_val:
            vl, va = _evaluate(current, val_x, val_y)
            history.val_loss.append(vl)
            history.val_accuracy.append(va)
        else:
            vl = tl
        if vl < best_loss:
            best, best_loss, stale = current.copy(), vl, 0
            history.best_epoch = epoch + 1
        else:
            stale += 1
            if cfg.patience is not None and stale >= cfg.patience:
                break
    return best, history


def _hex(a: np.ndarray) -> str:
    return np.ascontiguousarray(a, dtype="<f8").tobytes().hex()


def _unhex(s: str, shape) -> np.ndarray:
    a = np.frombuffer(bytes.fromhex(s), dtype="<f8").astype(np.float64)
    return a.reshape(shape)


def save_checkpoint(params: ModelParams, path, config_hash: str = "") -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(params.layer_sizes),
        "activation": params.activation,
        "config_hash": config_hash,
        "norm_mean": _hex(params.norm_mean),
        "norm_std": _hex(params.norm_std),
        "layers": [{"weights": _hex(w), "biases": _hex(b)} for w, b in zip(params.weights, params.biases)],
    }
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path) -> ModelParams:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptCheckpoint(f"{path}: not a complete checkpoint document ({exc.msg})") from None
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CorruptCheckpoint(f"{path}: not an {CHECKPOINT_FORMAT} checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {doc.get('version')}, expected {CHECKPOINT_VERSION}")
    try:
        sizes = tuple(int(s) for s in doc["layer_sizes"])
        weights, biases = [], []
        for i, layer in enumerate(doc["layers"]):
            weights.append(_unhex(layer["weights"], (sizes[i], sizes[i + 1])))
            biases.append(_unhex(layer["biases"], (sizes[i + 1],)))
        return ModelParams(sizes, weights, biases, doc["activation"],
                           _unhex(doc["norm_mean"], (sizes[0],)), _unhex(doc["norm_std"], (sizes[0],)))
    except (KeyError, ValueError, IndexError, TypeError, ShapeMismatch) as exc:
        raise CorruptCheckpoint(f"{path}: malformed checkpoint ({exc})") from None
