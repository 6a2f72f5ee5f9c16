"""Client learners with hand-written backprop, plus the local SGD loop."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .params import ParamSet


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "logreg" | "mlp"
    input_dim: int
    num_classes: int
    hidden_dim: Optional[int] = None
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in ("logreg", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1 or self.num_classes < 1:
            raise ValueError("input_dim and num_classes must be positive")
        if self.kind == "mlp":
            if self.hidden_dim is None or self.hidden_dim < 1:
                raise ValueError("mlp requires a positive hidden_dim")
        elif self.hidden_dim is not None:
            raise ValueError("hidden_dim is only valid for kind='mlp'")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")

    def layer_shapes(self) -> list[tuple[str, tuple[int, int]]]:
        d, k = self.input_dim, self.num_classes
        if self.kind == "logreg":
            return [("W", (d, k)), ("b", (1, k))]
        h = self.hidden_dim
        return [("W1", (d, h)), ("b1", (1, h)), ("W2", (h, k)), ("b2", (1, k))]


@dataclass(frozen=True)
class TrainConfig:
    local_epochs: int = 1
    batch_size: int = 32
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.local_epochs < 1 or self.batch_size < 1:
            raise ValueError("local_epochs and batch_size must be positive")
        # zero is allowed: a frozen client is a useful control
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")


def init_model(spec: ModelSpec, seed: int) -> ParamSet:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    layers = []
    for name, (rows, cols) in spec.layer_shapes():
        if name.startswith("b"):
            layers.append((name, np.zeros((rows, cols))))
        else:
            s = math.sqrt(6.0 / (rows + cols))
            layers.append((name, rng.uniform(-s, s, size=(rows, cols))))
    return ParamSet(layers)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _forward_backward(p, x, y, spec: ModelSpec, need_grad: bool = True):
    # p: mapping of layer arrays; returns (mean loss, grads dict or None)
    n = x.shape[0]
    if spec.kind == "logreg":
        logits = x @ p["W"] + p["b"]
    else:
        z1 = x @ p["W1"] + p["b1"]
        h = np.maximum(z1, 0.0) if spec.activation == "relu" else np.tanh(z1)
        logits = h @ p["W2"] + p["b2"]
    logp = _log_softmax(logits)
    rows = np.arange(n)
    loss = -logp[rows, y].mean()
    if not need_grad:
        return loss, None
    dlogits = np.exp(logp)
    dlogits[rows, y] -= 1.0
    dlogits /= n
    if spec.kind == "logreg":
        return loss, {"W": x.T @ dlogits, "b": dlogits.sum(axis=0, keepdims=True)}
    dh = dlogits @ p["W2"].T
    if spec.activation == "relu":
        dz1 = dh * (z1 > 0.0)
    else:
        dz1 = dh * (1.0 - h * h)
    return loss, {
        "W1": x.T @ dz1,
        "b1": dz1.sum(axis=0, keepdims=True),
        "W2": h.T @ dlogits,
        "b2": dlogits.sum(axis=0, keepdims=True),
    }


def _check_params(params: ParamSet, spec: ModelSpec) -> None:
    if params.shapes != spec.layer_shapes():
        raise ValueError(f"params {params.shapes} do not match model {spec.layer_shapes()}")


def loss_and_grad(params: ParamSet, dataset: Dataset, indices, spec: ModelSpec) -> tuple[float, ParamSet]:
    """Mean cross-entropy over ``dataset[indices]`` and its gradient."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty index batch")
    _check_params(params, spec)
    loss, grads = _forward_backward(params, dataset.features[idx], dataset.labels[idx], spec)
    return float(loss), ParamSet._wrap({k: grads[k] for k in params})


def local_train_with_loss(params: ParamSet, dataset: Dataset, shard, cfg: TrainConfig,
                          seed: int, spec: ModelSpec) -> tuple[ParamSet, float]:
    """Run local mini-batch SGD; also return the mean batch loss of the last epoch."""
    shard = np.asarray(shard, dtype=np.int64)
    if shard.size == 0:
        raise ValueError("empty shard")
    _check_params(params, spec)
    rng = np.random.default_rng(seed)
    w = params.copy_arrays()
    x_all, y_all = dataset.features, dataset.labels
    lr = cfg.learning_rate
    epoch_loss = 0.0
    for _ in range(cfg.local_epochs):
        order = shard[rng.permutation(shard.size)]
        losses = []
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grads = _forward_backward(w, x_all[batch], y_all[batch], spec)
            losses.append(loss)
            for k, g in grads.items():
                w[k] -= lr * g
        epoch_loss = float(np.mean(losses))
    return ParamSet._wrap(w), epoch_loss


def local_train(params: ParamSet, dataset: Dataset, shard, cfg: TrainConfig, seed: int,
                spec: ModelSpec) -> ParamSet:
    return local_train_with_loss(params, dataset, shard, cfg, seed, spec)[0]


def predict(params: ParamSet, features: np.ndarray, spec: ModelSpec) -> np.ndarray:
    if spec.kind == "logreg":
        logits = features @ params["W"] + params["b"]
    else:
        z1 = features @ params["W1"] + params["b1"]
        h = np.maximum(z1, 0.0) if spec.activation == "relu" else np.tanh(z1)
        logits = h @ params["W2"] + params["b2"]
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(logits, axis=1)


def evaluate(params: ParamSet, dataset: Dataset, spec: ModelSpec) -> tuple[float, float]:
    """Mean loss and top-1 accuracy over the whole dataset."""
    _check_params(params, spec)
    loss, _ = _forward_backward(params, dataset.features, dataset.labels, spec, need_grad=False)
    acc = float(np.mean(predict(params, dataset.features, spec) == dataset.labels))
    return float(loss), acc
