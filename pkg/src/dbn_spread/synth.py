"""Synthetic data: a cointegrated two-leg futures pair written in the same CSV
layout as the exchange exports, and a planted-signal classification set."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from datetime import date, timedelta

import numpy as np

from .market_data import DailyBar, DailyBarSeries


@dataclass(frozen=True)
class SynthConfig:
    """Price model for both legs.

    A shared random walk (an interest-rate proxy) drives both legs with
    sensitivities ``sens_a``/``sens_b``; each leg adds its own AR(1) noise.
    Opens gap away from the previous close by ``gap_sd``.
    """

    n_days: int = 3000
    start_date: str = "2000-01-03"
    level_a: float = 110.0
    level_b: float = 120.0
    sens_a: float = 5.0
    sens_b: float = 6.25
    factor_sd: float = 0.05
    noise_sd: float = 0.04
    noise_phi: float = 0.9
    gap_sd: float = 0.02
    wick_sd: float = 0.05

    def to_dict(self) -> dict:
        return asdict(self)


def business_days(start: date, n: int) -> list[date]:
    days, d = [], start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def _ar1(rng: np.random.Generator, n: int, phi: float, sd: float) -> np.ndarray:
    eps = rng.normal(0.0, sd, size=n)
    out = np.empty(n)
    acc = 0.0
    for t in range(n):
        acc = phi * acc + eps[t]
        out[t] = acc
    return out


def synth_pair(
    config: SynthConfig = SynthConfig(), seed: int = 7, names: tuple[str, str] = ("ZF", "ZN")
) -> tuple[DailyBarSeries, DailyBarSeries]:
    """Generate the two instruments (a 5-year-like leg a, 10-year-like leg b)."""
    rng = np.random.default_rng(seed)
    n = config.n_days
    factor = np.cumsum(rng.normal(0.0, config.factor_sd, size=n + 1))
    dates = business_days(date.fromisoformat(config.start_date), n)
    series = []
    legs = ((names[0], config.level_a, config.sens_a), (names[1], config.level_b, config.sens_b))
    for tag, level, sens in legs:
        noise = _ar1(rng, n + 1, config.noise_phi, config.noise_sd)
        close_path = level - sens * factor + noise
        gaps = rng.normal(0.0, config.gap_sd, size=n)
        wicks = np.abs(rng.normal(0.0, config.wick_sd, size=(n, 2)))
        volume = rng.integers(50_000, 500_000, size=n)
        open_interest = rng.integers(200_000, 1_500_000, size=n)
        bars = []
        for t in range(n):
            o = float(close_path[t] + gaps[t])
            c = float(close_path[t + 1])
            bars.append(
                DailyBar(
                    date=dates[t],
                    open=o,
                    high=max(o, c) + float(wicks[t, 0]),
                    low=min(o, c) - float(wicks[t, 1]),
                    close=c,
                    volume=float(volume[t]),
                    open_interest=float(open_interest[t]),
                )
            )
        series.append(DailyBarSeries(tag, tuple(bars)))
    return series[0], series[1]


def planted_signal_dataset(
    n: int, rate: float = 0.65, width: int = 20, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Features uniform on ``[0, 1]^width`` with labels that agree with a
    fixed linear rule on a fraction ``rate`` of rows (in expectation).

    The best achievable accuracy, and per-direction recall, is ``rate``.
    """
    rng = np.random.default_rng(seed)
    X = rng.random((n, width))
    direction = rng.normal(size=width)
    clean = np.where((X - 0.5) @ direction >= 0, 1, -1)
    flip = rng.random(n) >= rate
    return X, np.where(flip, -clean, clean).astype(np.int64)
