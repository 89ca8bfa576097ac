"""Daily futures bars: CSV ingestion, cleaning, mid-price alignment and splits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInputError, FormatError, SplitError, ValidationError


@dataclass(frozen=True)
class DailyBar:
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float
    open_interest: float

    def is_valid(self) -> bool:
        prices = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(p) and p > 0 for p in prices):
            return False
        if not (math.isfinite(self.volume) and math.isfinite(self.open_interest)):
            return False
        if self.volume < 0 or self.open_interest < 0:
            return False
        return self.low <= min(self.open, self.close) and self.high >= max(self.open, self.close)


@dataclass(frozen=True)
class DailyBarSeries:
    """Date-ordered bars for one instrument.

    ``excluded`` counts the rows dropped by the operation that produced the
    series (parse or clean); it is bookkeeping, not part of the data.
    """

    instrument: str
    bars: tuple[DailyBar, ...]
    excluded: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(self.bars))
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise FormatError(
                    f"{self.instrument}: dates not strictly increasing at {cur.date.isoformat()}"
                )

    def __len__(self) -> int:
        return len(self.bars)

    @property
    def dates(self) -> tuple[date, ...]:
        return tuple(b.date for b in self.bars)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AlignedPair:
    """Mid-prices of two instruments on their common dates."""

    dates: tuple[date, ...]
    prices_a: np.ndarray
    prices_b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "prices_a", _frozen(self.prices_a))
        object.__setattr__(self, "prices_b", _frozen(self.prices_b))
        n = len(self.dates)
        if self.prices_a.shape != (n,) or self.prices_b.shape != (n,):
            raise FormatError(
                f"aligned pair length mismatch: {n} dates, "
                f"{self.prices_a.shape} and {self.prices_b.shape} prices"
            )
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur <= prev:
                raise FormatError(f"aligned dates not strictly increasing at {cur.isoformat()}")

    def __len__(self) -> int:
        return len(self.dates)

    def slice(self, start: int, stop: int | None = None) -> "AlignedPair":
        return AlignedPair(self.dates[start:stop], self.prices_a[start:stop], self.prices_b[start:stop])

    def __eq__(self, other):
        if not isinstance(other, AlignedPair):
            return NotImplemented
        return (
            self.dates == other.dates
            and np.array_equal(self.prices_a, other.prices_a)
            and np.array_equal(self.prices_b, other.prices_b)
        )

    __hash__ = None


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if not all(0.0 < f < 1.0 for f in fracs):
            raise ValidationError(f"split fractions must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {sum(fracs)!r}")


@dataclass(frozen=True)
class ColumnMap:
    """Source column names. Tuples list accepted alternatives in preference order."""

    date: tuple[str, ...] = ("Date", "Trade Date")
    open: tuple[str, ...] = ("Open",)
    high: tuple[str, ...] = ("High",)
    low: tuple[str, ...] = ("Low",)
    close: tuple[str, ...] = ("Close", "Last", "Settle")
    volume: tuple[str, ...] = ("Volume",)
    open_interest: tuple[str, ...] = (
        "Open Interest",
        "Previous Day Open Interest",
        "Prev. Day Open Interest",
    )

    @classmethod
    def from_mapping(cls, mapping: dict | None) -> "ColumnMap":
        if not mapping:
            return cls()
        kwargs = {}
        for key, value in mapping.items():
            if key not in cls.__dataclass_fields__:
                raise ValidationError(f"unknown column mapping key: {key!r}")
            kwargs[key] = (value,) if isinstance(value, str) else tuple(value)
        return cls(**kwargs)


_FIELDS = ("date", "open", "high", "low", "close", "volume", "open_interest")


def _resolve_header(header: Sequence[str], columns: ColumnMap) -> dict[str, int]:
    stripped = [h.strip() for h in header]
    index = {}
    for name in _FIELDS:
        for candidate in getattr(columns, name):
            if candidate in stripped:
                index[name] = stripped.index(candidate)
                break
        else:
            raise FormatError(
                f"malformed header: no column for {name!r} "
                f"(looked for {list(getattr(columns, name))}, found {stripped})"
            )
    return index


def _parse_number(text: str) -> float:
    value = float(text.replace(",", "")) if text.strip() else math.nan
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def parse_cme_csv(
    text: str | Iterable[str],
    instrument: str,
    columns: ColumnMap | None = None,
    date_format: str = "%Y-%m-%d",
) -> DailyBarSeries:
    """Parse a header-plus-rows CSV of daily bars.

    Rows with an empty or unparsable required field are skipped and counted
    in ``excluded``; a file whose every row is skipped yields an empty
    series. The result is sorted by date; duplicate dates keep the first
    occurrence and count the rest as excluded.
    """
    columns = columns or ColumnMap()
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError(f"{instrument}: empty file, header row required") from None
    index = _resolve_header(header, columns)

    bars: dict[date, DailyBar] = {}
    excluded = 0
    seen_rows = 0
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        seen_rows += 1
        try:
            values = {name: row[i].strip() for name, i in index.items()}
            day = datetime.strptime(values.pop("date"), date_format).date()
            bar = DailyBar(date=day, **{k: _parse_number(v) for k, v in values.items()})
        except (IndexError, ValueError):
            excluded += 1
            continue
        if day in bars:
            excluded += 1
            continue
        bars[day] = bar

    if not seen_rows:
        raise EmptyInputError(f"{instrument}: no data rows after the header")
    return DailyBarSeries(instrument, tuple(bars[d] for d in sorted(bars)), excluded=excluded)


def series_to_csv(series: DailyBarSeries) -> str:
    """Canonical CSV (ISO dates) accepted back by :func:`parse_cme_csv`."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["Date", "Open", "High", "Low", "Close", "Volume", "Open Interest"])
    for b in series.bars:
        writer.writerow(
            [b.date.isoformat(), repr(b.open), repr(b.high), repr(b.low), repr(b.close),
             repr(b.volume), repr(b.open_interest)]
        )
    return out.getvalue()


def clean(
    series: DailyBarSeries, exclude_ranges: Iterable[tuple[date, date]] = ()
) -> DailyBarSeries:
    """Drop bars inside any closed ``(start, end)`` date range and bars that
    violate the OHLC invariants."""
    ranges = list(exclude_ranges)
    kept = []
    for bar in series.bars:
        if any(start <= bar.date <= end for start, end in ranges):
            continue
        if not bar.is_valid():
            continue
        kept.append(bar)
    return DailyBarSeries(series.instrument, tuple(kept), excluded=len(series) - len(kept))


def mid_price(bar: DailyBar) -> float:
    return (bar.open + bar.close) / 2.0


def align(a: DailyBarSeries, b: DailyBarSeries) -> AlignedPair:
    """Inner join on date, carrying each bar's open/close mid-price."""
    by_date_b = {bar.date: bar for bar in b.bars}
    dates, pa, pb = [], [], []
    for bar in a.bars:
        other = by_date_b.get(bar.date)
        if other is not None:
            dates.append(bar.date)
            pa.append(mid_price(bar))
            pb.append(mid_price(other))
    if not dates:
        raise EmptyInputError(f"{a.instrument} and {b.instrument} share no dates")
    return AlignedPair(tuple(dates), pa, pb)


def chronological_split(
    pair: AlignedPair, spec: SplitSpec = SplitSpec()
) -> tuple[AlignedPair, AlignedPair, AlignedPair]:
    n = len(pair)
    if n < 3:
        raise SplitError(f"need at least 3 rows to split, got {n}")
    # the epsilon guards against products like 0.1 * 30 landing just under an integer
    n_train = math.floor(n * spec.train_frac + 1e-9)
    n_val = math.floor(n * spec.val_frac + 1e-9)
    sizes = (n_train, n_val, n - n_train - n_val)
    if min(sizes) <= 0:
        raise SplitError(f"split of {n} rows by {spec} leaves an empty segment: {sizes}")
    return pair.slice(0, n_train), pair.slice(n_train, n_train + n_val), pair.slice(n_train + n_val)


def pair_to_csv(pair: AlignedPair) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", "mid_a", "mid_b"])
    for d, a, b in zip(pair.dates, pair.prices_a, pair.prices_b):
        writer.writerow([d.isoformat(), repr(float(a)), repr(float(b))])
    return out.getvalue()


def pair_from_csv(text: str) -> AlignedPair:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ["date", "mid_a", "mid_b"]:
        raise FormatError(f"aligned CSV must have columns date,mid_a,mid_b, got {reader.fieldnames}")
    dates, pa, pb = [], [], []
    for row in reader:
        dates.append(date.fromisoformat(row["date"]))
        pa.append(float(row["mid_a"]))
        pb.append(float(row["mid_b"]))
    if not dates:
        raise EmptyInputError("aligned CSV has no rows")
    return AlignedPair(tuple(dates), pa, pb)
