"""Point-wise base classifier over depth windows.

Every depth gets its own prediction, computed from a fixed-width block of
samples centred on it (edge-clamped at the ends of the well). The default
model is a one-hidden-layer ReLU network trained with Adam; a nearest-centroid
model with the same interface can be swapped in.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import DepthWindow
from .errors import DataError, LabelError
from .evaluation import confusion_from_labels, weighted_metrics

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    hidden: int = 128
    learning_rate: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    seed: int = 0
    patience: int = 10
    window: int = 16

    def __post_init__(self):
        for name in ("hidden", "epochs", "batch_size", "patience", "window"):
            if getattr(self, name) < 1:
                raise ValueError(f"TrainConfig.{name} must be positive")
        if not self.learning_rate > 0:
            raise ValueError("TrainConfig.learning_rate must be positive")
        if self.seed < 0:
            raise ValueError("TrainConfig.seed must be non-negative")


def schema_hash(class_names: Sequence[str], channel_names: Sequence[str]) -> str:
    text = "\x1f".join(class_names) + "\x1e" + "\x1f".join(channel_names)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def window_offsets(width: int) -> np.ndarray:
    """Offsets of the centred block; for even widths the extra sample sits above."""
    return np.arange(width) - width // 2


def depth_features(values: np.ndarray, positions: np.ndarray, width: int) -> np.ndarray:
    """Flattened ``width``-sample blocks centred on each position, edge-clamped."""
    idx = np.clip(positions[:, None] + window_offsets(width)[None, :], 0, values.shape[0] - 1)
    return values[idx].reshape(len(positions), -1)


def window_features(window: DepthWindow, width: int) -> np.ndarray:
    if window.source is not None:
        return depth_features(window.source.values, np.arange(window.start, window.end + 1), width)
    # no access to the well: clamp (pad by repetition) inside the block itself
    return depth_features(np.asarray(window.features), np.arange(window.width), width)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class BaseModel:
    """flatten -> hidden (ReLU) -> softmax over the label schema."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    class_names: tuple[str, ...]
    channel_names: tuple[str, ...]
    window: int
    kind: str = field(default="mlp", init=False)

    def __post_init__(self):
        if self.W2.shape[1] != len(self.class_names):
            raise ValueError("output layer width must equal the number of classes")
        if self.W1.shape[0] != self.window * len(self.channel_names):
            raise ValueError("input layer does not match window x channels")

    @property
    def K(self) -> int:
        return len(self.class_names)

    def forward(self, X: np.ndarray) -> np.ndarray:
        h = np.maximum(X @ self.W1 + self.b1, 0.0)
        return softmax(h @ self.W2 + self.b2)

    def permute_classes(self, order: Sequence[int]) -> "BaseModel":
        order = list(order)
        return replace(
            self, W2=self.W2[:, order], b2=self.b2[order],
            class_names=tuple(self.class_names[i] for i in order),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}


@dataclass(frozen=True, eq=False)
class CentroidModel:
    """Nearest-centroid stand-in: softmax of negative mean squared distance."""

    centroids: np.ndarray  # (K, D); rows of absent classes are NaN
    class_names: tuple[str, ...]
    channel_names: tuple[str, ...]
    window: int
    kind: str = field(default="centroid", init=False)

    @property
    def K(self) -> int:
        return len(self.class_names)

    def forward(self, X: np.ndarray) -> np.ndarray:
        present = ~np.isnan(self.centroids).any(axis=1)
        d2 = ((X[:, None, :] - np.nan_to_num(self.centroids)[None, :, :]) ** 2).mean(axis=2)
        logits = np.where(present[None, :], -d2, -np.inf)
        return softmax(logits)

    def arrays(self) -> dict[str, np.ndarray]:
        return {"centroids": self.centroids}


Model = BaseModel | CentroidModel


def predict_proba(model: Model, window: DepthWindow) -> np.ndarray:
    """Per-depth class probabilities, shape ``(window.width, K)``."""
    n_channels = window.features.shape[1]
    if n_channels != len(model.channel_names):
        raise DataError(
            f"window has {n_channels} channels, model expects {len(model.channel_names)}"
        )
    if window.width > model.window and window.source is None:
        raise DataError(f"window width {window.width} exceeds model window {model.window}")
    return model.forward(window_features(window, model.window))


def confidence(p) -> float:
    """Maximum class probability."""
    return float(np.max(p))


def _collect(windows: Sequence[DepthWindow], width: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    X, y = [], []
    for w in windows:
        if w.labels is None:
            raise DataError(f"window {w.well_id}[{w.start}:{w.end}] is unlabelled")
        if w.labels.size and int(w.labels.max()) >= K:
            raise LabelError(f"label index {int(w.labels.max())} outside [0, {K})")
        X.append(window_features(w, width))
        y.append(np.asarray(w.labels))
    return np.concatenate(X), np.concatenate(y).astype(np.int64)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def _val_f1(model: Model, X: np.ndarray, y: np.ndarray) -> float:
    pred = model.forward(X).argmax(axis=1)
    return weighted_metrics(confusion_from_labels(y, pred, model.K)).f1


def train(
    train_windows: Sequence[DepthWindow],
    val_windows: Sequence[DepthWindow],
    cfg: TrainConfig,
    class_names: Sequence[str],
    channel_names: Sequence[str],
) -> BaseModel:
    """Fit the MLP with mini-batch Adam on per-depth cross-entropy.

    Returns the epoch checkpoint with the highest validation weighted F1
    (earliest epoch on ties); stops after ``cfg.patience`` epochs without
    improvement. With no validation windows the last epoch is kept.
    """
    if not train_windows:
        raise DataError("empty training set")
    K, width = len(class_names), cfg.window
    X, y = _collect(train_windows, width, K)
    if X.shape[0] == 0:
        raise DataError("empty training set")
    Xv, yv = _collect(val_windows, width, K) if val_windows else (None, None)

    rng = np.random.default_rng(cfg.seed)
    D = X.shape[1]
    params = {
        "W1": _glorot(rng, D, cfg.hidden),
        "b1": np.zeros(cfg.hidden),
        "W2": _glorot(rng, cfg.hidden, K),
        "b2": np.zeros(K),
    }
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    onehot = np.eye(K)[y]

    def snapshot() -> BaseModel:
        return BaseModel(
            *(params[k].copy() for k in ("W1", "b1", "W2", "b2")),
            class_names=tuple(class_names), channel_names=tuple(channel_names), window=width,
        )

    best, best_f1, stale = snapshot(), -1.0, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(X.shape[0])
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, tb = X[idx], onehot[idx]
            pre = xb @ params["W1"] + params["b1"]
            h = np.maximum(pre, 0.0)
            p = softmax(h @ params["W2"] + params["b2"])
            total += -np.sum(tb * np.log(np.clip(p, 1e-12, None)))
            dz = (p - tb) / len(idx)
            dh = (dz @ params["W2"].T) * (pre > 0)
            grads = {"W2": h.T @ dz, "b2": dz.sum(axis=0), "W1": xb.T @ dh, "b1": dh.sum(axis=0)}
            step += 1
            for k, g in grads.items():
                m[k] = beta1 * m[k] + (1 - beta1) * g
                v[k] = beta2 * v[k] + (1 - beta2) * g * g
                mhat = m[k] / (1 - beta1 ** step)
                vhat = v[k] / (1 - beta2 ** step)
                params[k] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
        current = snapshot()
        if Xv is None:
            best = current
            continue
        f1 = _val_f1(current, Xv, yv)
        log.debug("epoch %d loss %.4f val_f1 %.4f", epoch, total / X.shape[0], f1)
        if f1 > best_f1:
            best, best_f1, stale = current, f1, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    return best


def train_centroid(
    train_windows: Sequence[DepthWindow],
    width: int,
    class_names: Sequence[str],
    channel_names: Sequence[str],
) -> CentroidModel:
    if not train_windows:
        raise DataError("empty training set")
    K = len(class_names)
    X, y = _collect(train_windows, width, K)
    cents = np.full((K, X.shape[1]), np.nan)
    for k in range(K):
        if np.any(y == k):
            cents[k] = X[y == k].mean(axis=0)
    return CentroidModel(cents, tuple(class_names), tuple(channel_names), width)


def save_model(model: Model, path: str | Path) -> None:
    """Plain decimal text; ``repr`` floats reload bit-exactly."""
    lines = [
        "# lithoroute base model v1",
        f"kind {model.kind}",
        f"window {model.window}",
        "channels " + "\t".join(model.channel_names),
        "classes " + "\t".join(model.class_names),
        f"schema_hash {schema_hash(model.class_names, model.channel_names)}",
    ]
    for name, arr in model.arrays().items():
        a = np.atleast_2d(arr) if arr.ndim == 1 else arr
        lines.append(f"array {name} {' '.join(map(str, arr.shape))}")
        for row in a:
            lines.append(" ".join(repr(float(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> Model:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# lithoroute base model"):
        raise DataError(f"{path}: not a base-model file")
    head: dict[str, str] = {}
    arrays: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        if key == "array":
            name, *dims = rest.split()
            shape = tuple(int(d) for d in dims)
            nrows = shape[0] if len(shape) == 2 else 1
            rows = [[float(x) for x in lines[i + 1 + r].split()] for r in range(nrows)]
            arrays[name] = np.array(rows).reshape(shape)
            i += 1 + nrows
        else:
            head[key] = rest
            i += 1
    classes = tuple(head["classes"].split("\t"))
    channels = tuple(head["channels"].split("\t"))
    if schema_hash(classes, channels) != head.get("schema_hash"):
        raise DataError(f"{path}: schema hash mismatch")
    width = int(head["window"])
    if head["kind"] == "mlp":
        return BaseModel(arrays["W1"], arrays["b1"], arrays["W2"], arrays["b2"], classes, channels, width)
    if head["kind"] == "centroid":
        return CentroidModel(arrays["centroids"], classes, channels, width)
    raise DataError(f"{path}: unknown model kind {head['kind']!r}")
