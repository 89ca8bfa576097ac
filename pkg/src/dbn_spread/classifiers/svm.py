"""Soft-margin SVM with a Gaussian (RBF) kernel, solved in the dual by
sequential minimal optimization.

The dual is ``min 1/2 a'Qa - sum(a)`` subject to ``0 <= a <= C`` and
``y'a = 0``, with ``Q_ij = y_i y_j K(x_i, x_j)``. Each step picks the
maximally violating pair (first-order working-set selection) and solves the
two-variable subproblem analytically.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, ShapeError, TrainingError

TOLERANCE = 1e-3
MAX_ITERATIONS = 1_000_000
SUPPORT_THRESHOLD = 1e-8
_TAU = 1e-12
_CACHE_BYTES = 256 * 1024 * 1024


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    kernel_gamma: float
    cost: float
    iterations: int = 0
    kkt_violation: float = 0.0

    def __post_init__(self):
        sv = np.array(self.support_vectors, dtype=np.float64)
        coef = np.array(self.dual_coefficients, dtype=np.float64)
        if sv.ndim != 2 or coef.shape != (sv.shape[0],) or sv.shape[0] == 0:
            raise ShapeError("an SVM needs at least one support vector and one coefficient each")
        if np.any(np.abs(coef) > self.cost * (1 + 1e-12)):
            raise ShapeError("dual coefficients exceed the cost bound")
        sv.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefficients", coef)

    @property
    def n_inputs(self) -> int:
        return self.support_vectors.shape[1]

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefficients": self.dual_coefficients.tolist(),
            "bias": self.bias,
            "kernel_gamma": self.kernel_gamma,
            "cost": self.cost,
            "iterations": self.iterations,
            "kkt_violation": self.kkt_violation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        return cls(
            np.array(d["support_vectors"]), np.array(d["dual_coefficients"]), d["bias"],
            d["kernel_gamma"], d["cost"], d["iterations"], d["kkt_violation"],
        )


class _KernelRows:
    """Lazily computed kernel rows with an LRU cache."""

    def __init__(self, X: np.ndarray, gamma: float):
        self.X = X
        self.gamma = gamma
        self.sq = (X * X).sum(axis=1)
        self.capacity = max(2, _CACHE_BYTES // (8 * X.shape[0]))
        self.rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def __getitem__(self, i: int) -> np.ndarray:
        row = self.rows.get(i)
        if row is not None:
            self.rows.move_to_end(i)
            return row
        sq = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
        row = np.exp(-self.gamma * np.maximum(sq, 0.0))
        self.rows[i] = row
        if len(self.rows) > self.capacity:
            self.rows.popitem(last=False)
        return row


@dataclass(frozen=True, eq=False)
class DualSolution:
    alpha: np.ndarray
    bias: float
    iterations: int
    kkt_violation: float


def smo_solve(
    X, y, C: float, gamma: float, tol: float = TOLERANCE, max_iter: int = MAX_ITERATIONS
) -> DualSolution:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    K = _KernelRows(X, gamma)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective, Q alpha - 1
    violation = np.inf
    for it in range(max_iter + 1):
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * grad
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        violation = score[i] - score[j] if up.any() and low.any() else 0.0
        if violation <= tol:
            break
        if it == max_iter:
            raise ConvergenceError(f"SMO did not converge in {max_iter} pair updates", violation)
        Ki, Kj = K[i], K[j]
        quad = Ki[i] + Kj[j] - 2.0 * Ki[j]
        if quad <= 0:
            quad = _TAU
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
                if aj > C:
                    aj, ai = C, total - C
            else:
                if aj < 0:
                    aj, ai = 0.0, total
                if ai < 0:
                    ai, aj = 0.0, total
        d_i, d_j = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        grad += y * (y[i] * d_i * Ki + y[j] * d_j * Kj)
    iterations = it

    # offset from free vectors; fall back to the midpoint of the feasible interval
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(yg[free]))
    else:
        at_upper = alpha >= C
        ub_mask = ((y > 0) & ~at_upper) | ((y < 0) & at_upper)
        lb_mask = ((y > 0) & at_upper) | ((y < 0) & ~at_upper)
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0)
    return DualSolution(alpha, -rho, iterations, float(violation))


def svm_train(X, y, C: float = 1.0, gamma: float | None = None, tol: float = TOLERANCE,
              max_iter: int = MAX_ITERATIONS) -> SvmModel:
    """Fit an RBF-kernel soft-margin SVM. ``gamma`` defaults to 1/width."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError(f"X {X.shape} and y {y.shape} do not match")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise TrainingError("SVM training needs both classes")
    if gamma is None:
        gamma = 1.0 / X.shape[1]
    sol = smo_solve(X, y, C, gamma, tol, max_iter)
    keep = sol.alpha > SUPPORT_THRESHOLD
    return SvmModel(
        X[keep], sol.alpha[keep] * y[keep], sol.bias, float(gamma), float(C),
        sol.iterations, sol.kkt_violation,
    )


def svm_decision(model: SvmModel, x) -> np.ndarray | float:
    """Signed distance proxy ``sum_i a_i y_i K(x_i, x) + b``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_inputs:
        raise ShapeError(f"input width {x.shape[-1]}, model expects {model.n_inputs}")
    out = rbf_kernel(x, model.support_vectors, model.kernel_gamma) @ model.dual_coefficients + model.bias
    return float(out[0]) if x.ndim == 1 else out
