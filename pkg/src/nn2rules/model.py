"""Feed-forward networks with ReLU hidden layers and a single sigmoid output."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .schema import Dataset, FeatureSchema

log = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "sigmoid")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str

    def __post_init__(self):
        W = np.array(self.weights, dtype=np.float64, ndmin=2)
        b = np.array(self.biases, dtype=np.float64, ndmin=1)
        if self.activation not in ACTIVATIONS:
            raise ModelError(f"unsupported activation {self.activation!r}")
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ModelError(f"bias shape {b.shape} does not match weight shape {W.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ModelError("layer parameters must be finite")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def width(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ModelError("network needs at least one layer")
        for k, (prev, cur) in enumerate(zip(layers, layers[1:]), 2):
            if cur.weights.shape[1] != prev.width:
                raise ModelError(f"layer {k} expects {cur.weights.shape[1]} inputs, layer {k - 1} has {prev.width}")
        for k, layer in enumerate(layers[:-1], 1):
            if layer.activation != "relu":
                raise ModelError(f"hidden layer {k}: unsupported activation {layer.activation!r} (only relu)")
        if layers[-1].activation != "sigmoid" or layers[-1].width != 1:
            raise ModelError("output layer must be a single sigmoid unit")
        object.__setattr__(self, "layers", layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def hidden_widths(self) -> list[int]:
        return [layer.width for layer in self.layers[:-1]]

    def check_schema(self, schema: FeatureSchema) -> None:
        if self.input_width != schema.n:
            raise ModelError(f"network input width {self.input_width} != schema one-hot width {schema.n}")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def _as_batch(net: Network, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != net.input_width:
        raise ModelError(f"input has width {X.shape[-1]}, network expects {net.input_width}")
    return X.reshape(-1, net.input_width)


def forward_batch(net: Network, X) -> list[np.ndarray]:
    """Pre-activations ``y^k`` of every layer for a batch of inputs."""
    h = _as_batch(net, X)
    pre = []
    for layer in net.layers:
        y = h @ layer.weights.T + layer.biases
        pre.append(y)
        h = np.maximum(y, 0.0)
    return pre


def forward(net: Network, x) -> tuple[list[np.ndarray], float]:
    pre = forward_batch(net, np.asarray(x, dtype=np.float64)[None, :])
    return [p[0] for p in pre], float(sigmoid(pre[-1][0, 0]))


def logits(net: Network, X) -> np.ndarray:
    return forward_batch(net, X)[-1][:, 0]


def predict_batch(net: Network, X) -> np.ndarray:
    # y^L = 0 counts as positive, matching the >= used for positive rules
    return (logits(net, X) >= 0.0).astype(np.int64)


def predict(net: Network, x) -> int:
    return int(predict_batch(net, np.asarray(x, dtype=np.float64)[None, :])[0])


# ---------------------------------------------------------------------------
# construction and training


def glorot_init(widths: Sequence[int], rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    params = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-limit, limit, size=(fan_out, fan_in)), np.zeros(fan_out)))
    return params


def from_params(params: Sequence[tuple[np.ndarray, np.ndarray]]) -> Network:
    acts = ["relu"] * (len(params) - 1) + ["sigmoid"]
    return Network(tuple(Layer(W, b, a) for (W, b), a in zip(params, acts)))


def random_network(input_width: int, hidden: Sequence[int], seed: int, bias_scale: float = 0.5) -> Network:
    """An untrained network: Glorot weights plus normally distributed biases."""
    rng = np.random.default_rng(seed)
    params = glorot_init([input_width, *hidden, 1], rng)
    params = [(W, rng.normal(0.0, bias_scale, size=b.shape)) for W, b in params]
    return from_params(params)


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (6, 3)
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 200
    seed: int = 42

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class TrainingDiverged(RuntimeError):
    pass


def bce_loss(params, X, y) -> float:
    """Mean binary cross-entropy of the network given by ``params``."""
    h = X
    for W, b in params[:-1]:
        h = np.maximum(h @ W.T + b, 0.0)
    W, b = params[-1]
    z = (h @ W.T + b)[:, 0]
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def bce_grad(params, X, y):
    """Analytic gradient of :func:`bce_loss` by backpropagation."""
    hs, zs = [X], []
    h = X
    for W, b in params:
        z = h @ W.T + b
        zs.append(z)
        h = np.maximum(z, 0.0)
        hs.append(h)
    delta = (sigmoid(zs[-1]) - y[:, None]) / len(y)
    grads = []
    for k in range(len(params) - 1, -1, -1):
        W, _ = params[k]
        grads.append((delta.T @ hs[k], delta.sum(axis=0)))
        if k:
            delta = (delta @ W) * (zs[k - 1] > 0)
    return grads[::-1]


def train(data: Dataset, config: TrainConfig = TrainConfig()) -> Network:
    """Mini-batch SGD on binary cross-entropy; deterministic given the config."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if not config.hidden or any(w < 1 for w in config.hidden):
        raise ValueError(f"hidden widths must be >= 1, got {list(config.hidden)}")
    X = data.one_hot()
    y = data.y.astype(np.float64)
    rng = np.random.default_rng(config.seed)
    params = glorot_init([X.shape[1], *config.hidden, 1], rng)
    lr, bs = config.learning_rate, config.batch_size
    for epoch in range(config.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), bs):
            idx = order[start:start + bs]
            grads = bce_grad(params, X[idx], y[idx])
            params = [(W - lr * gW, b - lr * gb) for (W, b), (gW, gb) in zip(params, grads)]
        if not all(np.all(np.isfinite(W)) and np.all(np.isfinite(b)) for W, b in params):
            raise TrainingDiverged(f"parameters became non-finite in epoch {epoch + 1}; lower the learning rate")
        if (epoch + 1) % 50 == 0 or epoch + 1 == config.epochs:
            loss = bce_loss(params, X, y)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"loss is {loss} after epoch {epoch + 1}")
            log.info("epoch %d loss %.5f", epoch + 1, loss)
    return from_params(params)


# ---------------------------------------------------------------------------
# weight files


def to_json_dict(net: Network) -> dict:
    return {
        "input_width": net.input_width,
        "layers": [{"weights": layer.weights.tolist(), "biases": layer.biases.tolist(),
                    "activation": layer.activation} for layer in net.layers],
    }


def from_json_dict(d: dict, schema: FeatureSchema | None = None) -> Network:
    try:
        layers = tuple(Layer(np.asarray(l["weights"], dtype=float), np.asarray(l["biases"], dtype=float),
                             l["activation"]) for l in d["layers"])
        width = int(d["input_width"])
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed weight file: missing or bad field {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed weight file: {exc}") from None
    net = Network(layers)
    if net.input_width != width:
        raise ModelError(f"declared input_width {width} != first layer width {net.input_width}")
    if schema is not None:
        net.check_schema(schema)
    return net


def save_weights(net: Network, path: str | Path) -> None:
    # json writes floats with repr(), which round-trips doubles exactly
    Path(path).write_text(json.dumps(to_json_dict(net), indent=1) + "\n", encoding="utf-8")


def load_weights(path: str | Path, schema: FeatureSchema | None = None) -> Network:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed weight file {path}: {exc}") from None
    return from_json_dict(d, schema)
