"""Linear SVMs trained by deterministic subgradient descent.

Hinge loss with L2 regularization, per-sample updates in a seeded shuffle
order, fixed epoch count. One-vs-all composition for the multi-class case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateTrainingSet


def train_binary_svm(x: np.ndarray, y: np.ndarray, lam: float = 1e-4,
                     epochs: int = 100, seed: int = 0,
                     eta0: float = 1.0) -> tuple[np.ndarray, float]:
    """Weights and bias of sign(w.x + b); y must be in {-1, +1}."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for i in order:
            t += 1
            eta = eta0 / (1.0 + eta0 * lam * t)
            margin = y[i] * (x[i] @ w + b)
            w *= (1.0 - eta * lam)
            if margin < 1.0:
                w += eta * y[i] * x[i]
                b += eta * y[i]
    return w, b


def hinge_loss(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float) -> float:
    margins = y * (x @ w + b)
    return float(np.maximum(0.0, 1.0 - margins).mean())


@dataclass
class MultiSvm:
    """One-vs-all linear SVM; `classes` fixes the column order of decisions."""

    classes: list
    weights: np.ndarray  # (n_classes, d)
    biases: np.ndarray   # (n_classes,)

    def decision(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ self.weights.T + self.biases

    def predict(self, x: np.ndarray) -> list:
        idx = np.argmax(self.decision(x), axis=1)
        return [self.classes[i] for i in idx]


def train_multi_svm(x: np.ndarray, labels, classes, lam: float = 1e-4,
                    epochs: int = 100, seed: int = 0) -> MultiSvm:
    x = np.asarray(x, dtype=np.float64)
    classes = list(classes)
    labels = list(labels)
    if len(classes) < 2:
        raise DegenerateTrainingSet("need at least 2 classes")
    for c in classes:
        if sum(1 for lb in labels if lb == c) < 2:
            raise DegenerateTrainingSet(f"class {c} has fewer than 2 samples")
    weights = np.zeros((len(classes), x.shape[1]))
    biases = np.zeros(len(classes))
    for k, c in enumerate(classes):
        y = np.where(np.array([lb == c for lb in labels]), 1.0, -1.0)
        weights[k], biases[k] = train_binary_svm(x, y, lam=lam, epochs=epochs,
                                                 seed=seed + k)
    return MultiSvm(classes=classes, weights=weights, biases=biases)
