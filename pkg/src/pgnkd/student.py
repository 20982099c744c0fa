"""Student action classifier: a ReLU MLP with softmax output, trained on soft targets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .embedding import N_TPV_CLASSES, softmax
from .workspace import N_ACTIONS

LAYER_SIZES = (N_TPV_CLASSES, 2048, 1024, N_ACTIONS)


class NonFiniteGradientError(FloatingPointError):
    """Backpropagation produced NaN or infinite gradients."""


@dataclass
class MlpModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, sizes=LAYER_SIZES, rng: np.random.Generator | None = None) -> "MlpModel":
        """Glorot-uniform weights, zero biases."""
        rng = rng if rng is not None else np.random.default_rng(0)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes=LAYER_SIZES) -> "MlpModel":
        return cls([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(b) for b in sizes[1:]])

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    @property
    def n_parameters(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "MlpModel":
        return MlpModel([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def logits(self, X: np.ndarray) -> np.ndarray:
        h = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]


def forward(m: MlpModel, x) -> np.ndarray:
    """Action probabilities for one input vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise ValueError("non-finite input")
    return softmax(m.logits(x))


def kd_loss(target, pred) -> float:
    """KL(target || pred) in nats; zero-probability target entries contribute nothing."""
    t = np.asarray(target, dtype=float)
    p = np.asarray(pred, dtype=float)
    nz = t > 0
    return float(np.sum(t[nz] * (np.log(t[nz]) - np.log(p[nz]))))


def batch_kd_loss(T: np.ndarray, P: np.ndarray) -> np.ndarray:
    logs = np.where(T > 0, T * (np.log(np.where(T > 0, T, 1.0)) - np.log(P)), 0.0)
    return logs.sum(axis=1)


def loss_and_grads(m: MlpModel, X: np.ndarray, T: np.ndarray, weights: np.ndarray | None = None):
    """Weighted-mean KL loss and its gradients in ``params()`` order."""
    if weights is None:
        weights = np.ones(len(X))
    weights = weights / weights.sum()
    acts = [X]
    pre = []
    h = X
    for W, b in zip(m.weights[:-1], m.biases[:-1]):
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    P = softmax(h @ m.weights[-1] + m.biases[-1])
    loss = float(weights @ batch_kd_loss(T, P))
    # d KL / d logits = p - t because every target row sums to one
    delta = (P - T) * weights[:, None]
    grads = []
    for layer in range(len(m.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(acts[layer].T @ delta)
        if layer > 0:
            delta = (delta @ m.weights[layer].T) * (pre[layer - 1] > 0)
    grads.reverse()
    return loss, grads


@dataclass
class OptimizerState:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_model(cls, model: MlpModel, learning_rate: float = 0.001) -> "OptimizerState":
        return cls(learning_rate, m=[np.zeros_like(p) for p in model.params()],
                   v=[np.zeros_like(p) for p in model.params()])


def train_step(m: MlpModel, opt: OptimizerState, batch, sample_weight=None):
    """One Adam update on a batch of ``(x, target)`` pairs; returns ``(m, opt, loss)``."""
    if isinstance(batch, tuple) and len(batch) == 2 and isinstance(batch[0], np.ndarray) and batch[0].ndim == 2:
        X, T = batch
    else:
        if len(batch) == 0:
            raise ValueError("empty batch")
        X = np.array([b[0] for b in batch], dtype=float)
        T = np.array([b[1] for b in batch], dtype=float)
    loss, grads = loss_and_grads(m, X, T, sample_weight)
    if not all(np.isfinite(g).all() for g in grads):
        raise NonFiniteGradientError("gradient contains NaN or inf")
    opt.step += 1
    c1 = 1.0 - opt.beta1 ** opt.step
    c2 = 1.0 - opt.beta2 ** opt.step
    for p, g, mom, vel in zip(m.params(), grads, opt.m, opt.v):
        mom *= opt.beta1
        mom += (1.0 - opt.beta1) * g
        vel *= opt.beta2
        vel += (1.0 - opt.beta2) * g * g
        p -= opt.learning_rate * (mom / c1) / (np.sqrt(vel / c2) + opt.eps)
    return m, opt, loss


class MlpStudent(ClassifierMixin, BaseEstimator):
    """Soft-target MLP classifier over the 13 actions.

    ``fit(X, T)`` takes a matrix of target distributions rather than labels.
    Training stops early once the held-out KL has not improved by
    ``min_delta`` for ``patience`` epochs, keeping the best parameters.
    """

    def __init__(self, hidden_sizes=(2048, 1024), learning_rate=0.001, batch_size=32,
                 max_epochs=100, patience=10, min_delta=1e-5, validation_fraction=0.1,
                 random_state=0):
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.min_delta = min_delta
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def fit(self, X, T, sample_weight=None):
        X = check_array(X, dtype=np.float64)
        T = check_array(T, dtype=np.float64)
        if len(X) == 0 or len(X) != len(T):
            raise ValueError("need a nonempty dataset with one target per input")
        w = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        rng = np.random.default_rng(self.random_state)
        sizes = (X.shape[1],) + tuple(self.hidden_sizes) + (T.shape[1],)
        model = MlpModel.init(sizes, rng)
        opt = OptimizerState.for_model(model, self.learning_rate)

        n_val = int(len(X) * self.validation_fraction) if len(X) >= 20 else 0
        order = rng.permutation(len(X))
        val, train = order[:n_val], order[n_val:]
        monitor = val if n_val else train

        best, best_loss, stale = model.copy(), math.inf, 0
        self.loss_curve_, self.validation_curve_ = [], []
        for _ in range(self.max_epochs):
            perm = train[rng.permutation(len(train))]
            epoch_loss = 0.0
            for start in range(0, len(perm), self.batch_size):
                idx = perm[start:start + self.batch_size]
                model, opt, loss = train_step(model, opt, (X[idx], T[idx]), w[idx])
                epoch_loss += loss * w[idx].sum()
            self.loss_curve_.append(epoch_loss / w[train].sum())
            P = forward(model, X[monitor])
            val_loss = float(w[monitor] @ batch_kd_loss(T[monitor], P) / w[monitor].sum())
            self.validation_curve_.append(val_loss)
            if val_loss < best_loss - self.min_delta:
                best, best_loss, stale = model.copy(), val_loss, 0
            else:
                stale += 1
                if stale >= self.patience:
                    break
        self.model_ = best
        self.n_epochs_ = len(self.loss_curve_)
        self.classes_ = np.arange(T.shape[1])
        return self

    @classmethod
    def from_model(cls, model: MlpModel, **params) -> "MlpStudent":
        """Wrap an already trained model (e.g. one loaded from disk)."""
        est = cls(hidden_sizes=tuple(model.sizes[1:-1]), **params)
        est.model_ = model
        est.classes_ = np.arange(model.sizes[-1])
        est.n_epochs_ = 0
        return est

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return forward(self.model_, check_array(X, dtype=np.float64))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)
