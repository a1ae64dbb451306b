"""Per-sample loss models with analytic parameter gradients.

Both models predict through an affine link z = theta[0] + theta[1:].x.
With a 1-dimensional parameter the link degenerates to z = theta[0],
so squared_error reproduces the mean-estimation loss (theta - y)^2.

squared_error:  l(z, y) = (z - y)^2
logistic:       l(z, y) = log(1 + e^z) - y*z   (cross-entropy, real-valued y)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LossModel", "squared_error", "logistic"]


@dataclass(frozen=True)
class LossModel:
    kind: str
    p: int

    def _features(self, x: np.ndarray) -> np.ndarray:
        # x: (k, d) -> (k, p) with a leading intercept column
        k, d = x.shape
        if self.p == 1:
            return np.ones((k, 1))
        if self.p != d + 1:
            raise ValueError(
                f"parameter dimension {self.p} incompatible with covariate dim {d}"
            )
        return np.column_stack([np.ones(k), x])

    def _check_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.shape[0] != self.p:
            raise ValueError(f"expected parameter of length {self.p}, got {theta.shape[0]}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("non-finite parameter")
        return theta

    def values(self, theta, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-sample losses for covariate matrix x (k, d) and responses y (k,)."""
        theta = self._check_theta(theta)
        z = self._features(x) @ theta
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "squared_error":
            return (z - y) ** 2
        return np.logaddexp(0.0, z) - y * z

    def grads(self, theta, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-sample gradients d l / d theta, shape (k, p)."""
        theta = self._check_theta(theta)
        feats = self._features(x)
        z = feats @ theta
        y = np.asarray(y, dtype=np.float64)
        if self.kind == "squared_error":
            w = 2.0 * (z - y)
        else:
            w = 1.0 / (1.0 + np.exp(-z)) - y
        return feats * w[:, None]

    def value(self, theta, x, y) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return float(self.values(theta, x, np.array([y]))[0])

    def gradient(self, theta, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return self.grads(theta, x, np.array([y]))[0]


def squared_error(p: int = 1) -> LossModel:
    return LossModel("squared_error", int(p))


def logistic(p: int = 1) -> LossModel:
    return LossModel("logistic", int(p))
