"""Daily hedged spread entries held for a fixed horizon, with PNL accounting."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from datetime import date

import numpy as np

from .errors import ShapeError, ValidationError
from .features import Dataset
from .market_data import AlignedPair

LONG = "long-portfolio"
SHORT = "short-portfolio"

# sentinel for signals_from_classifier: pass the dataset's labels straight through
ORACLE = "oracle"


@dataclass(frozen=True)
class StrategyConfig:
    """Trade sizing. Leg a is the long leg of a long-portfolio position.

    ``invert_signal`` (default on) goes long the portfolio when the signal
    predicts a fall, and short when it predicts a rise.
    """

    size_a: int = 10
    size_b: int = 8
    horizon_days: int = 5
    point_value_a: float = 1000.0
    point_value_b: float = 1000.0
    invert_signal: bool = True
    transaction_cost_per_contract: float = 0.0

    def __post_init__(self):
        if self.size_a <= 0 or self.size_b <= 0:
            raise ValidationError("trade sizes must be positive")
        if self.horizon_days < 1:
            raise ValidationError("horizon must be at least one day")
        if self.point_value_a <= 0 or self.point_value_b <= 0:
            raise ValidationError("point values must be positive")

    def direction(self, signal: int) -> str:
        up = signal > 0
        if self.invert_signal:
            up = not up
        return LONG if up else SHORT

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Position:
    entry_index: int
    exit_index: int
    direction: str
    entry_a: float
    entry_b: float
    exit_a: float
    exit_b: float
    pnl: float


@dataclass(frozen=True, eq=False)
class PnlLedger:
    """Closed positions in entry order and the cumulative realized PNL on
    each trading date (a position's PNL lands on its exit date)."""

    dates: tuple[date, ...]
    positions: tuple[Position, ...]
    cumulative_pnl: np.ndarray

    @property
    def total_pnl(self) -> float:
        return float(self.cumulative_pnl[-1]) if len(self.cumulative_pnl) else 0.0

    def positions_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["entry_date", "exit_date", "direction", "entry_a", "entry_b", "exit_a", "exit_b", "pnl"])
        for p in self.positions:
            writer.writerow([
                self.dates[p.entry_index].isoformat(), self.dates[p.exit_index].isoformat(), p.direction,
                repr(p.entry_a), repr(p.entry_b), repr(p.exit_a), repr(p.exit_b), repr(p.pnl),
            ])
        return out.getvalue()

    def cumulative_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["day", "date", "cumulative_pnl"])
        for i, (d, v) in enumerate(zip(self.dates, self.cumulative_pnl)):
            writer.writerow([i, d.isoformat(), repr(float(v))])
        return out.getvalue()


def signals_from_classifier(classifier, dataset: Dataset) -> np.ndarray:
    """Predicted 5-day direction (+1 up, -1 down) for each dataset row.

    ``classifier`` is a fitted :class:`~dbn_spread.classifiers.TrainedClassifier`
    or :data:`ORACLE`, which returns the dataset labels unchanged.
    """
    if isinstance(classifier, str) and classifier == ORACLE:
        return np.array(dataset.labels, dtype=np.int64)
    signals = classifier.predict(dataset.X)
    if signals.shape != (len(dataset),):
        raise ShapeError(f"classifier returned {signals.shape} signals for {len(dataset)} rows")
    return signals


def _position_pnl(direction: str, da: float, db: float, config: StrategyConfig) -> float:
    spread = config.size_a * config.point_value_a * da - config.size_b * config.point_value_b * db
    pnl = spread if direction == LONG else -spread
    # both legs, opened and closed
    return pnl - 2.0 * config.transaction_cost_per_contract * (config.size_a + config.size_b)


def simulate(pair: AlignedPair, signals, config: StrategyConfig = StrategyConfig()) -> PnlLedger:
    """Open one hedged position per signal day and square it off
    ``horizon_days`` later at the mid-prices of that day.

    ``signals[t]`` is the signal for pair index ``t``; positions may overlap.
    """
    s = np.asarray(signals)
    h = config.horizon_days
    if s.ndim != 1 or not np.all(np.isin(s, (-1, 1))):
        raise ValidationError("signals must be a vector of +1/-1")
    if len(s) > len(pair) - h:
        raise ShapeError(
            f"{len(s)} signals but only {max(len(pair) - h, 0)} days can be squared off "
            f"within the data at a {h}-day horizon"
        )
    pa, pb = pair.prices_a, pair.prices_b
    realized = np.zeros(len(pair))
    positions = []
    for t, sig in enumerate(s):
        direction = config.direction(int(sig))
        x = t + h
        pnl = _position_pnl(direction, pa[x] - pa[t], pb[x] - pb[t], config)
        positions.append(Position(t, x, direction, float(pa[t]), float(pb[t]), float(pa[x]), float(pb[x]), pnl))
        realized[x] += pnl
    return PnlLedger(pair.dates, tuple(positions), np.cumsum(realized))


def perfect_foresight_signals(pair: AlignedPair, n: int, config: StrategyConfig = StrategyConfig()) -> np.ndarray:
    """Signals that, under ``config``'s direction mapping, always take the
    side the traded spread actually moves to over the horizon."""
    h = config.horizon_days
    spread = config.size_a * config.point_value_a * pair.prices_a - config.size_b * config.point_value_b * pair.prices_b
    rises = spread[h:h + n] >= spread[:n]
    sig = np.where(rises, 1, -1)
    return -sig if config.invert_signal else sig


def random_baseline(n: int, seed: int = 0) -> np.ndarray:
    """I.i.d. fair-coin +/-1 signals."""
    if n < 1:
        raise ValidationError("need at least one signal")
    rng = np.random.default_rng(seed)
    return np.where(rng.random(n) < 0.5, 1, -1).astype(np.int64)


@dataclass(frozen=True)
class BacktestSummary:
    total_pnl: float
    max_drawdown: float
    hit_rate: float
    position_count: int

    def to_dict(self) -> dict:
        return asdict(self)


def max_drawdown(cumulative) -> float:
    c = np.asarray(cumulative, dtype=np.float64)
    if c.size == 0:
        return 0.0
    return float(np.max(np.maximum.accumulate(c) - c))


def summarize(ledger: PnlLedger) -> BacktestSummary:
    n = len(ledger.positions)
    wins = sum(1 for p in ledger.positions if p.pnl > 0)
    return BacktestSummary(
        total_pnl=ledger.total_pnl,
        max_drawdown=max_drawdown(ledger.cumulative_pnl),
        hit_rate=wins / n if n else 0.0,
        position_count=n,
    )
