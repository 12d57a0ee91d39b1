"""Softmax classifier with an optional ReLU hidden layer, trained with Adam.

Layers are stored as ``(out, in)`` weight matrices. Everything is float64.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import CannotTrainError, InvalidInputError, TrainingDivergedError


@dataclass(frozen=True)
class ModelConfig:
    hidden_units: int = 0
    learning_rate: float = 1.5e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    target_train_accuracy: float = 0.98
    max_epochs: int = 500

    def __post_init__(self):
        if self.hidden_units < 0:
            raise InvalidInputError("hidden_units must be >= 0")
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if not 0 < self.target_train_accuracy <= 1:
            raise InvalidInputError("target_train_accuracy must lie in (0, 1]")
        if self.max_epochs < 1:
            raise InvalidInputError("max_epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")


@dataclass
class ModelState:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    m_weights: list[np.ndarray] = field(default_factory=list)
    v_weights: list[np.ndarray] = field(default_factory=list)
    m_biases: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)
    step_count: int = 0

    def __post_init__(self):
        if not self.m_weights:
            self.m_weights = [np.zeros_like(w) for w in self.weights]
            self.v_weights = [np.zeros_like(w) for w in self.weights]
            self.m_biases = [np.zeros_like(b) for b in self.biases]
            self.v_biases = [np.zeros_like(b) for b in self.biases]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def penultimate_dim(self) -> int:
        return self.weights[-1].shape[1]

    def num_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> ModelState:
        return copy.deepcopy(self)


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    final_train_accuracy: float
    threshold_reached: bool


def init_model(config: ModelConfig, dims: tuple[int, int], rng: np.random.Generator) -> ModelState:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases and moments."""
    d, c = dims
    if d < 1 or c < 2:
        raise InvalidInputError(f"need D >= 1 and C >= 2, got D={d}, C={c}")
    sizes = [d] + ([config.hidden_units] if config.hidden_units else []) + [c]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelState(weights, biases)


def _check_features(model: ModelState, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim or x.ndim not in (1, 2):
        raise InvalidInputError(f"expected feature length {model.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("features must be finite")
    return x


def _forward(model: ModelState, X: np.ndarray):
    """Returns (logits, activations) where activations[i] is the input to layer i."""
    acts = [X]
    h = X
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w.T + b, 0.0)
        acts.append(h)
    logits = h @ model.weights[-1].T + model.biases[-1]
    return logits, acts


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def predict_proba(model: ModelState, features) -> np.ndarray:
    """Class probabilities for one feature vector, or row-wise for a matrix."""
    x = _check_features(model, features)
    logits, _ = _forward(model, np.atleast_2d(x))
    p = softmax(logits)
    return p[0] if x.ndim == 1 else p


def penultimate(model: ModelState, features) -> np.ndarray:
    x = _check_features(model, features)
    _, acts = _forward(model, np.atleast_2d(x))
    return acts[-1][0] if x.ndim == 1 else acts[-1]


def loss_and_gradients(model: ModelState, X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its gradients w.r.t. every weight and bias."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    logits, acts = _forward(model, X)
    logp = _log_softmax(logits)
    loss = -logp[np.arange(n), y].mean()

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = delta.T @ acts[i]
        grad_b[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i]) * (acts[i] > 0)
    return loss, grad_w, grad_b


def _adam_update(model: ModelState, grad_w, grad_b, config: ModelConfig) -> None:
    model.step_count += 1
    t = model.step_count
    b1, b2 = config.adam_beta1, config.adam_beta2
    c1, c2 = 1 - b1**t, 1 - b2**t
    for params, grads, ms, vs in (
        (model.weights, grad_w, model.m_weights, model.v_weights),
        (model.biases, grad_b, model.m_biases, model.v_biases),
    ):
        for p, g, m, v in zip(params, grads, ms, vs):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.adam_eps)


def _accuracy(model: ModelState, X: np.ndarray, y: np.ndarray) -> float:
    logits, _ = _forward(model, X)
    return float(np.mean(np.argmax(softmax(logits), axis=1) == y))


def train_to_threshold(
    model: ModelState,
    features,
    labels,
    config: ModelConfig,
    rng: np.random.Generator,
) -> tuple[ModelState, TrainReport]:
    """Shuffled mini-batch Adam until post-epoch train accuracy hits the target.

    At least one epoch always runs. Returns a trained copy; ``model`` is untouched.
    """
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise CannotTrainError("cannot train on an empty labeled set")
    _check_features(model, X)
    model = model.copy()
    n = X.shape[0]
    acc = 0.0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, gw, gb = loss_and_gradients(model, X[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            _adam_update(model, gw, gb, config)
        acc = _accuracy(model, X, y)
        if acc >= config.target_train_accuracy:
            return model, TrainReport(epoch, acc, True)
    return model, TrainReport(config.max_epochs, acc, False)


def grad_embedding(model: ModelState, features) -> np.ndarray:
    """Output-layer cross-entropy gradient at the predicted label, flattened row-major.

    For a matrix input, returns one embedding per row, shape ``(n, C * H)``.
    """
    x = _check_features(model, features)
    X = np.atleast_2d(x)
    logits, acts = _forward(model, X)
    p = softmax(logits)
    # argmax takes the first maximum, i.e. the lowest class index on ties
    pseudo = np.argmax(p, axis=1)
    p[np.arange(X.shape[0]), pseudo] -= 1.0
    h = acts[-1]
    emb = (p[:, :, None] * h[:, None, :]).reshape(X.shape[0], -1)
    return emb[0] if x.ndim == 1 else emb


def evaluate_accuracy(model: ModelState, features, labels) -> float:
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] == 0:
        raise InvalidInputError("cannot evaluate on an empty set")
    p = predict_proba(model, X)
    return float(np.mean(np.argmax(p, axis=1) == y))
