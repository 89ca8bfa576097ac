"""Confusion counts, per-direction precision/recall and ROC/AUC.

The positive class is "up" (+1). Ratios with a zero denominator are
reported as ``None`` rather than 0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError, ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float | None:
        return _ratio(self.tp + self.tn, self.total)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DirectionRates:
    recall_up: float | None
    recall_down: float | None
    precision_up: float | None
    precision_down: float | None

    @property
    def mean_recall(self) -> float:
        """Average of the two recalls; an undefined recall counts as 0."""
        return 0.5 * ((self.recall_up or 0.0) + (self.recall_down or 0.0))

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def _pm1(x, what: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ShapeError(f"{what} must be a vector")
    if not np.all(np.isin(x, (-1, 1))):
        raise ValidationError(f"{what} must contain only +1/-1")
    return x


def confusion(predictions, labels) -> ConfusionCounts:
    p, y = _pm1(predictions, "predictions"), _pm1(labels, "labels")
    if p.shape != y.shape or len(p) == 0:
        raise ShapeError(f"predictions {p.shape} and labels {y.shape} must be equal, non-empty")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (y == 1))),
        fp=int(np.sum((p == 1) & (y == -1))),
        tn=int(np.sum((p == -1) & (y == -1))),
        fn=int(np.sum((p == -1) & (y == 1))),
    )


def precision_recall(counts: ConfusionCounts) -> DirectionRates:
    c = counts
    return DirectionRates(
        recall_up=_ratio(c.tp, c.tp + c.fn),
        recall_down=_ratio(c.tn, c.tn + c.fp),
        precision_up=_ratio(c.tp, c.tp + c.fp),
        precision_down=_ratio(c.tn, c.tn + c.fn),
    )


@dataclass(frozen=True, eq=False)
class RocCurve:
    """``fpr``/``tpr`` run from (0, 0) to (1, 1); ``thresholds[k]`` is the
    score at or above which point ``k`` predicts up (``inf`` for the origin)."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["threshold", "fpr", "tpr"])
        for t, f, r in zip(self.thresholds, self.fpr, self.tpr):
            writer.writerow([repr(float(t)), repr(float(f)), repr(float(r))])
        return out.getvalue()


def roc(scores, labels) -> RocCurve:
    """ROC over every distinct score, highest first. Tied scores move the
    curve together, so constant scores give the diagonal."""
    s = np.asarray(scores, dtype=np.float64)
    y = _pm1(labels, "labels")
    if s.shape != y.shape:
        raise ShapeError(f"scores {s.shape} and labels {y.shape} differ")
    n_pos, n_neg = int(np.sum(y == 1)), int(np.sum(y == -1))
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC is undefined unless both classes are present")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tps = np.cumsum(y == 1)[ends]
    fps = np.cumsum(y == -1)[ends]
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thresholds = np.r_[np.inf, s[ends]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def metrics_report(predictions, labels, scores=None, score_kind: str | None = None) -> dict:
    """Counts, the four direction rates and (with scores) the AUC."""
    counts = confusion(predictions, labels)
    report = {
        "counts": counts.to_dict(),
        "accuracy": counts.accuracy,
        "rates": precision_recall(counts).to_dict(),
    }
    if scores is not None:
        report["auc"] = roc(scores, labels).auc
        report["score_kind"] = score_kind
    return report
