"""Two-instrument PCA and the second-component spread portfolio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import DegenerateDataError, InsufficientDataError, NumericError
from .market_data import AlignedPair


@dataclass(frozen=True)
class Standardizer:
    mean_a: float
    mean_b: float
    std_a: float
    std_b: float

    def __post_init__(self):
        if not (self.std_a > 0 and self.std_b > 0):
            raise DegenerateDataError(f"standard deviations must be positive: {self.std_a}, {self.std_b}")

    def apply(self, pair: AlignedPair) -> AlignedPair:
        return AlignedPair(
            pair.dates,
            (pair.prices_a - self.mean_a) / self.std_a,
            (pair.prices_b - self.mean_b) / self.std_b,
        )


def fit_standardizer(train_pair: AlignedPair) -> Standardizer:
    """Population mean and standard deviation (divisor n) of each leg."""
    if len(train_pair) < 2:
        raise InsufficientDataError(f"need at least 2 rows to standardize, got {len(train_pair)}")
    a, b = train_pair.prices_a, train_pair.prices_b
    std_a, std_b = float(a.std()), float(b.std())
    if std_a == 0 or std_b == 0:
        raise DegenerateDataError("a price series has zero variance")
    return Standardizer(float(a.mean()), float(b.mean()), std_a, std_b)


@dataclass(frozen=True, eq=False)
class PcaResult:
    """Rows of ``loadings`` are components (descending variance), columns are
    the two instruments."""

    loadings: np.ndarray
    explained_variance_ratio: np.ndarray
    eigenvalues: np.ndarray

    @property
    def pc1(self) -> np.ndarray:
        return self.loadings[0]

    @property
    def pc2(self) -> np.ndarray:
        return self.loadings[1]

    def to_dict(self) -> dict:
        return {
            "loadings": self.loadings.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }


def _orient(v: np.ndarray) -> np.ndarray:
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        return -v
    return v


def eig_sym_2x2(cov) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigen-decomposition of a symmetric 2x2 matrix.

    Returns ``(eigenvalues, vectors)`` with eigenvalues descending and
    eigenvectors as unit-norm rows. Equal eigenvalues keep axis order.
    """
    cov = np.asarray(cov, dtype=np.float64)
    a, b, c = cov[0, 0], 0.5 * (cov[0, 1] + cov[1, 0]), cov[1, 1]
    if not all(math.isfinite(x) for x in (a, b, c)):
        raise NumericError(f"non-finite covariance entries: {cov.tolist()}")
    half_trace = 0.5 * (a + c)
    radius = math.hypot(0.5 * (a - c), b)
    lam1, lam2 = half_trace + radius, half_trace - radius
    if b == 0.0:
        if a >= c:
            v1 = np.array([1.0, 0.0])
        else:
            v1 = np.array([0.0, 1.0])
    else:
        # of the two equivalent forms, take the one with the larger norm
        x = np.array([lam1 - c, b])
        y = np.array([b, lam1 - a])
        v1 = x if np.hypot(*x) >= np.hypot(*y) else y
        v1 = v1 / np.hypot(*v1)
    v2 = np.array([v1[1], -v1[0]])
    return np.array([lam1, lam2]), np.vstack([_orient(v1), _orient(v2)])


def pca_2d(standardized_pair: AlignedPair) -> PcaResult:
    if len(standardized_pair) < 2:
        raise InsufficientDataError("PCA needs at least 2 rows")
    data = np.column_stack([standardized_pair.prices_a, standardized_pair.prices_b])
    cov = np.cov(data, rowvar=False, ddof=1)
    eigenvalues, vectors = eig_sym_2x2(cov)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    total = eigenvalues.sum()
    if total <= 0:
        raise NumericError("covariance has zero total variance")
    return PcaResult(vectors, eigenvalues / total, eigenvalues)


@dataclass(frozen=True, eq=False)
class PortfolioSeries:
    dates: tuple[date, ...]
    prices: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)


def portfolio_price(
    pair: AlignedPair, loadings_pc2, standardizer: Standardizer | None = None
) -> PortfolioSeries:
    """Weighted sum of the two legs' prices.

    Raw mid-prices by default; pass ``standardizer`` to weight standardized
    prices instead.
    """
    w_a, w_b = (float(x) for x in loadings_pc2)
    if standardizer is not None:
        pair = standardizer.apply(pair)
    return PortfolioSeries(pair.dates, w_a * pair.prices_a + w_b * pair.prices_b)


@dataclass(frozen=True)
class VarianceCheck:
    passed: bool
    ratios: tuple[float, float]
    threshold: float

    def __bool__(self) -> bool:
        return self.passed


def explained_variance_check(result: PcaResult, threshold: float = 0.99) -> VarianceCheck:
    ratios = tuple(float(r) for r in result.explained_variance_ratio)
    return VarianceCheck(ratios[0] >= threshold, ratios, threshold)
