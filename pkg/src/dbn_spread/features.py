"""Trend features over moving-average windows, min-max scaling and direction labels."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyInputError, FormatError, InsufficientDataError, ShapeError
from .market_data import AlignedPair

DEFAULT_WINDOWS = (5, 10)
DEFAULT_LAGS = 5
DEFAULT_HORIZON = 5


def _readonly(arr) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    dates: tuple[date, ...]
    rows: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        rows = _readonly(self.rows)
        if rows.ndim != 2 or rows.shape[0] != len(self.dates) or rows.shape[1] != len(self.column_names):
            raise ShapeError(
                f"feature rows {rows.shape} do not match {len(self.dates)} dates "
                f"x {len(self.column_names)} columns"
            )
        if not np.all(np.isfinite(rows)):
            raise FormatError("feature matrix contains non-finite entries")
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return len(self.dates)

    def head(self, n: int) -> "FeatureMatrix":
        return FeatureMatrix(self.dates[:n], self.rows[:n], self.column_names)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: FeatureMatrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (len(self.features),):
            raise ShapeError(f"{labels.shape[0]} labels for {len(self.features)} feature rows")
        if not np.all(np.isin(labels, (-1, 1))):
            raise FormatError("labels must be +1 or -1")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def X(self) -> np.ndarray:
        return self.features.rows

    @property
    def dates(self) -> tuple[date, ...]:
        return self.features.dates


@dataclass(frozen=True, eq=False)
class MinMaxScaler:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo, hi = _readonly(self.minimum), _readonly(self.maximum)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ShapeError(f"scaler extrema shapes differ: {lo.shape} vs {hi.shape}")
        if np.any(hi < lo):
            raise FormatError("scaler maximum below minimum")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "MinMaxScaler":
        return cls(np.array(d["minimum"]), np.array(d["maximum"]))


def moving_average(prices, window: int) -> np.ndarray:
    """Trailing mean; the first ``window - 1`` entries are NaN (undefined)."""
    prices = np.asarray(prices, dtype=np.float64)
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if len(prices) < window:
        raise InsufficientDataError(f"{len(prices)} prices for a {window}-day moving average")
    out = np.full(len(prices), np.nan)
    out[window - 1:] = sliding_window_view(prices, window).mean(axis=1)
    return out


def trend(prices, window: int) -> np.ndarray:
    """Price minus its trailing moving average (NaN where undefined)."""
    prices = np.asarray(prices, dtype=np.float64)
    return prices - moving_average(prices, window)


def feature_names(windows: Sequence[int] = DEFAULT_WINDOWS, lags: int = DEFAULT_LAGS) -> tuple[str, ...]:
    return tuple(
        f"{leg}_ma{w}_lag{k}" for leg in ("a", "b") for w in windows for k in range(lags)
    )


def warmup_rows(windows: Sequence[int] = DEFAULT_WINDOWS, lags: int = DEFAULT_LAGS) -> int:
    return max(windows) - 1 + lags - 1


def build_features(
    pair: AlignedPair, windows: Sequence[int] = DEFAULT_WINDOWS, lags: int = DEFAULT_LAGS
) -> FeatureMatrix:
    """Lagged trend features for both legs.

    Column (leg, window, lag) at row t holds ``trend(leg, window)[t - lag]``.
    Rows whose constituents are undefined are dropped from the head, so the
    first row corresponds to pair index ``max(windows) - 1 + lags - 1``.
    """
    start = warmup_rows(windows, lags)
    n = len(pair)
    if n <= start:
        raise InsufficientDataError(
            f"{n} rows cannot cover a {max(windows)}-day window plus {lags} lags"
        )
    columns = []
    for prices in (pair.prices_a, pair.prices_b):
        for w in windows:
            t = trend(prices, w)
            for k in range(lags):
                columns.append(t[start - k: n - k])
    return FeatureMatrix(pair.dates[start:], np.column_stack(columns), feature_names(windows, lags))


def fit_scaler(train: FeatureMatrix) -> MinMaxScaler:
    if len(train) == 0:
        raise EmptyInputError("cannot fit a scaler on zero rows")
    return MinMaxScaler(train.rows.min(axis=0), train.rows.max(axis=0))


def apply_scaler(scaler: MinMaxScaler, m: FeatureMatrix) -> FeatureMatrix:
    """Scale with training extrema. Out-of-range values are not clipped;
    columns that were constant in training map to 0."""
    if m.rows.shape[1] != scaler.minimum.shape[0]:
        raise ShapeError(f"matrix has {m.rows.shape[1]} columns, scaler {scaler.minimum.shape[0]}")
    span = scaler.maximum - scaler.minimum
    constant = span == 0
    scaled = (m.rows - scaler.minimum) / np.where(constant, 1.0, span)
    scaled[:, constant] = 0.0
    return FeatureMatrix(m.dates, scaled, m.column_names)


def make_labels(portfolio_prices, horizon: int = DEFAULT_HORIZON) -> np.ndarray:
    """+1 where the price ``horizon`` steps ahead is strictly higher, else -1.
    The result has ``len(prices) - horizon`` entries."""
    p = np.asarray(portfolio_prices, dtype=np.float64)
    if len(p) <= horizon:
        raise InsufficientDataError(f"{len(p)} prices for a {horizon}-step label horizon")
    return np.where(p[horizon:] > p[:-horizon], 1, -1).astype(np.int64)


def make_dataset(features: FeatureMatrix, portfolio_prices, horizon: int = DEFAULT_HORIZON) -> Dataset:
    """Attach labels to feature rows.

    ``portfolio_prices`` must be aligned to the feature rows (already trimmed
    of warm-up). The trailing ``horizon`` rows have no label and are dropped.
    """
    p = np.asarray(portfolio_prices, dtype=np.float64)
    if len(p) != len(features):
        raise ShapeError(f"{len(p)} portfolio prices for {len(features)} feature rows")
    labels = make_labels(p, horizon)
    return Dataset(features.head(len(labels)), labels)


def dataset_to_csv(ds: Dataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", *ds.features.column_names, "label"])
    for d, row, y in zip(ds.dates, ds.X, ds.labels):
        writer.writerow([d.isoformat(), *(repr(float(v)) for v in row), int(y)])
    return out.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[0] != "date" or header[-1] != "label":
        raise FormatError("dataset CSV must start with 'date' and end with 'label'")
    dates, rows, labels = [], [], []
    for rec in reader:
        dates.append(date.fromisoformat(rec[0]))
        rows.append([float(v) for v in rec[1:-1]])
        labels.append(int(rec[-1]))
    names = header[1:-1]
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return Dataset(FeatureMatrix(tuple(dates), matrix, names), np.array(labels))
