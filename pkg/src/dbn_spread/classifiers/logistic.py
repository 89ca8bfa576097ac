"""Ridge-penalized logistic regression fitted by full-batch gradient ascent."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DivergenceError, ShapeError
from ..rbm import sigmoid


@dataclass(frozen=True, eq=False)
class LogisticModel:
    """``theta[0]`` is the bias; ``theta[1:]`` weights the inputs."""

    theta: np.ndarray
    ridge_lambda: float = 0.0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise ShapeError("theta must be a finite vector")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def n_inputs(self) -> int:
        return self.theta.shape[0] - 1

    def to_dict(self) -> dict:
        return {"theta": self.theta.tolist(), "ridge_lambda": self.ridge_lambda}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(np.array(d["theta"]), d["ridge_lambda"])


def _design(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.column_stack([np.ones(X.shape[0]), X])


def log_likelihood_objective(theta, X, y, ridge_lambda: float) -> float:
    """Mean log-likelihood of the +/-1 labels minus ``lambda * |w|^2``."""
    margins = np.asarray(y) * (_design(X) @ theta)
    loglik = -np.mean(np.logaddexp(0.0, -margins))
    return float(loglik - ridge_lambda * np.dot(theta[1:], theta[1:]))


def _loglik_gradient(theta, Z, y) -> np.ndarray:
    margins = y * (Z @ theta)
    return Z.T @ (y * sigmoid(-margins)) / Z.shape[0]


def objective_gradient(theta, X, y, ridge_lambda: float) -> np.ndarray:
    grad = _loglik_gradient(theta, _design(X), np.asarray(y, dtype=np.float64))
    grad[1:] -= 2.0 * ridge_lambda * theta[1:]
    return grad


def logreg_train(
    X,
    y,
    ridge_lambda: float = 0.0,
    lr: float = 0.5,
    epochs: int = 200,
    on_epoch: Callable[[int, LogisticModel], None] | None = None,
) -> LogisticModel:
    """Gradient ascent from ``theta = 0``.

    The ridge term is applied as an implicit step,
    ``w <- (w + lr * g) / (1 + 2 lr lambda)``, which agrees with plain
    ascent to first order in ``lr`` and stays stable for very large
    ``lambda``. The bias is not penalized.
    """
    Z = _design(X)
    y = np.asarray(y, dtype=np.float64)
    if Z.shape[0] != y.shape[0]:
        raise ShapeError(f"{Z.shape[0]} rows but {y.shape[0]} labels")
    theta = np.zeros(Z.shape[1])
    shrink = 1.0 / (1.0 + 2.0 * lr * ridge_lambda)
    for epoch in range(1, epochs + 1):
        theta = theta + lr * _loglik_gradient(theta, Z, y)
        theta[1:] *= shrink
        if not np.all(np.isfinite(theta)):
            raise DivergenceError("logistic regression diverged", epoch)
        if on_epoch is not None:
            on_epoch(epoch, LogisticModel(theta, ridge_lambda))
    return LogisticModel(theta, ridge_lambda)


def logreg_score(model: LogisticModel, x) -> np.ndarray | float:
    """P(up | x) for one vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_inputs:
        raise ShapeError(f"input width {x.shape[-1]}, model expects {model.n_inputs}")
    return sigmoid(x @ model.theta[1:] + model.theta[0])
