"""Direction classifiers and the wrapper that ties each to its input pipeline.

Logistic regression and the SVM read the DBN's binary latent features. The
network is the DBN itself unrolled with an output unit, so it reads the
scaled features the DBN was pretrained on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ShapeError, ValidationError
from ..metrics import confusion, precision_recall
from ..rbm import DbnModel, dbn_transform
from ..util import FORMAT_VERSION
from .logistic import LogisticModel, log_likelihood_objective, logreg_score, logreg_train, objective_gradient
from .neural import NeuralNet, mse, mse_gradient, nn_from_dbn, nn_score, nn_train, to_targets
from .svm import SvmModel, rbf_kernel, smo_solve, svm_decision, svm_train

KINDS = ("logreg", "svm", "nn")
DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)

_MODEL_TYPES = {"logreg": LogisticModel, "svm": SvmModel, "nn": NeuralNet}
_SCORE_KIND = {"logreg": "probability", "svm": "decision_value", "nn": "probability"}


def labels_from_scores(scores, threshold: float) -> np.ndarray:
    """+1 at or above ``threshold``, else -1."""
    return np.where(np.asarray(scores) >= threshold, 1, -1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    """A fitted model plus the DBN that turns scaled features into its input.

    ``score`` and ``predict`` take min-max scaled feature rows.
    """

    kind: str
    model: LogisticModel | SvmModel | NeuralNet
    dbn: DbnModel | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown classifier kind {self.kind!r}")
        if not isinstance(self.model, _MODEL_TYPES[self.kind]):
            raise ValidationError(f"{self.kind} classifier given a {type(self.model).__name__}")

    @property
    def score_kind(self) -> str:
        return _SCORE_KIND[self.kind]

    @property
    def threshold(self) -> float:
        return 0.0 if self.kind == "svm" else 0.5

    def inputs(self, features) -> np.ndarray:
        X = np.asarray(getattr(features, "rows", features), dtype=np.float64)
        if self.kind == "nn" or self.dbn is None:
            return X
        if X.shape[1] != self.dbn.input_width:
            raise ShapeError(f"features have {X.shape[1]} columns, DBN expects {self.dbn.input_width}")
        return dbn_transform(self.dbn, X, mode="threshold")

    def score(self, features) -> np.ndarray:
        X = self.inputs(features)
        if self.kind == "logreg":
            return np.atleast_1d(logreg_score(self.model, X))
        if self.kind == "svm":
            return np.atleast_1d(svm_decision(self.model, X))
        return np.atleast_1d(nn_score(self.model, X))

    def predict(self, features) -> np.ndarray:
        return labels_from_scores(self.score(features), self.threshold)

    def to_dict(self, pipeline: dict | None = None) -> dict:
        """Serializable form. ``pipeline`` names the scaler/DBN files this
        model depends on; the DBN parameters themselves are not embedded."""
        return {
            "format_version": FORMAT_VERSION,
            "model": "classifier",
            "kind": self.kind,
            "params": self.model.to_dict(),
            "uses_dbn": self.dbn is not None,
            "pipeline": pipeline or {},
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, d: dict, dbn: DbnModel | None = None) -> "TrainedClassifier":
        if d.get("model") != "classifier":
            raise ValidationError(f"not a classifier file: {d.get('model')!r}")
        if d["uses_dbn"] and dbn is None:
            raise ValidationError(f"{d['kind']} classifier needs its DBN to be supplied")
        model = _MODEL_TYPES[d["kind"]].from_dict(d["params"])
        return cls(d["kind"], model, dbn if d["uses_dbn"] else None, d.get("info", {}))


def validation_score(predictions, labels) -> float:
    """Model-selection criterion: mean of the up and down recalls."""
    return precision_recall(confusion(predictions, labels)).mean_recall


def select_svm(
    X, y, X_val, y_val, c_grid: Sequence[float] = DEFAULT_C_GRID, gamma: float | None = None
) -> tuple[SvmModel, dict]:
    """Fit one SVM per cost value; keep the best on validation (first on ties)."""
    best, best_score, scores = None, -np.inf, {}
    for C in c_grid:
        model = svm_train(X, y, C=C, gamma=gamma)
        s = validation_score(labels_from_scores(svm_decision(model, X_val), 0.0), y_val)
        scores[repr(float(C))] = s
        if s > best_score:
            best, best_score = model, s
    return best, {"selected_C": best.cost, "validation_scores": scores}


class BestEpoch:
    """``on_epoch`` callback that keeps the model with the best validation score."""

    def __init__(self, X_val, y_val, score_fn, threshold: float):
        self.X_val, self.y_val = X_val, y_val
        self.score_fn, self.threshold = score_fn, threshold
        self.best_epoch, self.best_score, self.best_model = 0, -np.inf, None
        self.history: list[float] = []

    def __call__(self, epoch: int, model) -> None:
        s = validation_score(labels_from_scores(self.score_fn(model, self.X_val), self.threshold), self.y_val)
        self.history.append(s)
        if s > self.best_score:
            self.best_epoch, self.best_score, self.best_model = epoch, s, model


__all__ = [
    "KINDS", "DEFAULT_C_GRID", "TrainedClassifier", "BestEpoch", "labels_from_scores",
    "validation_score", "select_svm",
    "LogisticModel", "logreg_train", "logreg_score", "log_likelihood_objective", "objective_gradient",
    "SvmModel", "svm_train", "svm_decision", "smo_solve", "rbf_kernel",
    "NeuralNet", "nn_from_dbn", "nn_train", "nn_score", "mse", "mse_gradient", "to_targets",
]
