"""Place classes, reciprocal-rank embeddings and the lightweight place classifiers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .workspace import GridWorkspace, Pose

GRID_COLS = 10
GRID_ROWS = 5
N_POSITIONS = GRID_COLS * GRID_ROWS
N_ANGLE_BINS = 12
N_FPV_CLASSES = N_POSITIONS * N_ANGLE_BINS
N_TPV_CLASSES = N_POSITIONS


@dataclass(frozen=True)
class PlaceClassScheme:
    """10x5 partition of the workspace bounding box, times 12 heading bins for FPV."""

    width_m: float
    height_m: float

    @classmethod
    def for_workspace(cls, w: GridWorkspace) -> "PlaceClassScheme":
        return cls(w.width_m, w.height_m)

    def position_cell(self, x: float, y: float) -> int:
        col = min(max(math.floor(x / (self.width_m / GRID_COLS)), 0), GRID_COLS - 1)
        row = min(max(math.floor(y / (self.height_m / GRID_ROWS)), 0), GRID_ROWS - 1)
        return row * GRID_COLS + col

    @staticmethod
    def angle_bin(heading: float) -> int:
        # bins are centered on multiples of 30 degrees
        return int(((heading + 15.0) % 360.0) // 30.0) % N_ANGLE_BINS

    def pose_to_class(self, p: Pose, modality: str = "fpv") -> int:
        cell = self.position_cell(p.x, p.y)
        if modality == "tpv":
            return cell
        if modality == "fpv":
            return cell * N_ANGLE_BINS + self.angle_bin(p.heading)
        raise ValueError(f"unknown modality {modality!r}")


def pose_to_class(scheme: PlaceClassScheme, p: Pose, modality: str = "fpv") -> int:
    return scheme.pose_to_class(p, modality)


@lru_cache(maxsize=None)
def harmonic(n: int) -> float:
    return math.fsum(1.0 / k for k in range(1, n + 1))


def rank_weights(n: int) -> np.ndarray:
    """``(1/r) / H_n`` for ranks ``r = 1..n``."""
    return 1.0 / np.arange(1, n + 1) / harmonic(n)


def ranks(scores) -> np.ndarray:
    """1-based rank of every entry by descending score, ties to the lower index.

    Works row-wise on 2-D input.
    """
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(-scores, axis=-1, kind="stable")
    out = np.empty_like(order)
    np.put_along_axis(out, order, np.arange(1, scores.shape[-1] + 1) + np.zeros_like(order), axis=-1)
    return out


def rre(probabilities) -> np.ndarray:
    """Reciprocal-rank embedding of a probability vector (or of each row)."""
    p = np.asarray(probabilities, dtype=float)
    n = p.shape[-1]
    return rank_weights(n)[ranks(p) - 1]


def compress_600_to_50(v) -> np.ndarray:
    """Sum each run of 12 heading classes into its position class (``j = i // 12``)."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != N_FPV_CLASSES:
        raise ValueError(f"expected {N_FPV_CLASSES} entries, got {v.shape[-1]}")
    return v.reshape(v.shape[:-1] + (N_POSITIONS, N_ANGLE_BINS)).sum(axis=-1)


def _flush_tiny(a: np.ndarray, floor: float = 1e-30) -> None:
    """Zero entries below ``floor`` in place; float32 subnormals make BLAS crawl."""
    a[np.abs(a) < floor] = 0.0


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class PlaceClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Multinomial logistic place classifier; ``transform`` yields RRE vectors.

    The output layer always has ``n_classes`` units, so classes absent from
    the training data are kept (and driven toward zero probability).
    """

    def __init__(self, n_classes=N_FPV_CLASSES, learning_rate=0.01, batch_size=256,
                 max_epochs=500, tol=1e-4, random_state=0):
        self.n_classes = n_classes
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        y = y.astype(np.int64)
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError("labels must lie in [0, n_classes)")
        rng = np.random.default_rng(self.random_state)
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        # float32 halves the cost of the (n, d) x (d, classes) products
        Z = ((X - self.mean_) / self.scale_).astype(np.float32)
        n, d = Z.shape
        W = np.zeros((d, self.n_classes), dtype=np.float32)
        b = np.zeros(self.n_classes, dtype=np.float32)
        params = [W, b]
        m = [np.zeros_like(q) for q in params]
        v = [np.zeros_like(q) for q in params]
        t = 0
        prev = math.inf
        self.loss_curve_ = []
        for epoch in range(self.max_epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                P = softmax(Z[idx] @ W + b)
                _flush_tiny(P)
                P[np.arange(len(idx)), y[idx]] -= 1.0
                P /= len(idx)
                grads = [Z[idx].T @ P, P.sum(axis=0)]
                t += 1
                c1, c2 = 1 - 0.9 ** t, 1 - 0.999 ** t
                for q, g, mq, vq in zip(params, grads, m, v):
                    mq *= 0.9
                    mq += 0.1 * g
                    vq *= 0.999
                    vq += 0.001 * g * g
                    _flush_tiny(mq)
                    _flush_tiny(vq)
                    q -= (self.learning_rate * (mq / c1) / (np.sqrt(vq / c2) + 1e-8)).astype(np.float32)
            P = softmax(Z @ W + b)
            loss = float(-np.mean(np.log(np.maximum(P[np.arange(n), y].astype(float), 1e-300))))
            self.loss_curve_.append(loss)
            if abs(prev - loss) < self.tol:
                break
            prev = loss
        W, b = W.astype(np.float64), b.astype(np.float64)
        self.coef_ = W
        self.intercept_ = b
        self.classes_ = np.arange(self.n_classes)
        self.n_epochs_ = len(self.loss_curve_)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return softmax(((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def proba_one(self, x: np.ndarray) -> np.ndarray:
        """``predict_proba`` for one feature vector, skipping input validation (hot loops)."""
        return softmax(((x - self.mean_) / self.scale_) @ self.coef_ + self.intercept_)

    def transform(self, X):
        return rre(self.predict_proba(X))
