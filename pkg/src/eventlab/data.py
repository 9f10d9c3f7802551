"""Daily series containers, CSV ingestion, and trading-calendar alignment.

Input files are delimiter-separated text (comma or tab, auto-detected from
the header line) with one header row. Dates are end-of-day calendar days;
no intraday handling. All series are immutable after construction and safe
to share across threads.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DATE_FORMATS = {
    "YYYY-MM-DD": "%Y-%m-%d",
    "DD/MM/YYYY": "%d/%m/%Y",
}

INTERSECTION = "intersection"
FORWARD_FILL = "forward-fill-limited"


class DataError(ValueError):
    """Input data violates a series or panel contract."""


def _freeze(values: Iterable[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for one delimited input file."""

    date_column: str = "date"
    value_column: str = "price"
    date_format: str = "YYYY-MM-DD"

    def __post_init__(self) -> None:
        if self.date_format not in DATE_FORMATS:
            raise DataError(
                f"unsupported date format {self.date_format!r}; "
                f"expected one of {sorted(DATE_FORMATS)}"
            )

    def parse_date(self, text: str) -> date:
        return datetime.strptime(text.strip(), DATE_FORMATS[self.date_format]).date()


@dataclass(frozen=True)
class SkippedRow:
    """A row that failed to parse and was excluded from the series."""

    line_number: int
    content: str
    reason: str


@dataclass(frozen=True)
class PriceSeries:
    """Date-indexed positive price observations for one instrument."""

    instrument_id: str
    dates: tuple[date, ...]
    prices: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "prices", _freeze(self.prices))
        if len(self.dates) != len(self.prices):
            raise DataError(f"{self.instrument_id}: dates and prices differ in length")
        _check_strictly_increasing(self.instrument_id, self.dates)
        bad = np.nonzero(~(self.prices > 0.0))[0]
        if bad.size:
            raise DataError(
                f"{self.instrument_id}: non-positive price on {self.dates[bad[0]].isoformat()}"
            )

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    """Date-indexed dimensionless values (log returns or daily rates)."""

    instrument_id: str
    dates: tuple[date, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _freeze(self.values))
        if len(self.dates) != len(self.values):
            raise DataError(f"{self.instrument_id}: dates and values differ in length")
        _check_strictly_increasing(self.instrument_id, self.dates)

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class TradingCalendar:
    """Named ordered set of trading days with exact membership."""

    name: str
    trading_dates: tuple[date, ...]

    def __post_init__(self) -> None:
        _check_strictly_increasing(self.name, self.trading_dates)

    def __contains__(self, day: date) -> bool:
        i = bisect.bisect_left(self.trading_dates, day)
        return i < len(self.trading_dates) and self.trading_dates[i] == day


@dataclass(frozen=True)
class AlignedPanel:
    """Several instruments on one shared date axis.

    Every column holds exactly one value per axis date. ``policy`` records
    how the axis was produced (e.g. ``intersection`` or
    ``forward-fill-limited(3)``).
    """

    dates: tuple[date, ...]
    columns: dict[str, np.ndarray]
    policy: str

    def __post_init__(self) -> None:
        frozen = {}
        for name, col in self.columns.items():
            arr = _freeze(col)
            if len(arr) != len(self.dates):
                raise DataError(f"column {name!r} length differs from the date axis")
            frozen[name] = arr
        object.__setattr__(self, "columns", frozen)

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, instrument_id: str) -> np.ndarray:
        try:
            return self.columns[instrument_id]
        except KeyError:
            raise DataError(f"panel has no column {instrument_id!r}") from None

    def with_column(self, instrument_id: str, values: np.ndarray) -> "AlignedPanel":
        cols = dict(self.columns)
        cols[instrument_id] = values
        return AlignedPanel(self.dates, cols, self.policy)


@dataclass(frozen=True)
class LoadResult:
    """A loaded series plus the rows that were skipped while parsing."""

    series: PriceSeries | ReturnSeries
    skipped: tuple[SkippedRow, ...]


def _check_strictly_increasing(label: str, dates: Sequence[date]) -> None:
    for prev, cur in zip(dates, dates[1:]):
        if cur == prev:
            raise DataError(f"{label}: duplicate date {cur.isoformat()}")
        if cur < prev:
            raise DataError(f"{label}: dates out of order at {cur.isoformat()}")


def _open_text(source) -> io.TextIOBase:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _read_rows(source, schema: CsvSchema, label: str):
    """Parse a delimited file into (date, value) rows plus skipped rows.

    Unparseable rows are collected, not silently dropped; duplicate dates
    are a hard rejection naming the offending date.
    """
    handle = _open_text(source)
    header_line = handle.readline()
    if not header_line.strip():
        raise DataError(f"{label}: empty input")
    delimiter = "\t" if "\t" in header_line else ","
    header = [h.strip() for h in header_line.rstrip("\r\n").split(delimiter)]
    for column in (schema.date_column, schema.value_column):
        if column not in header:
            raise DataError(f"{label}: column {column!r} not found in header {header}")
    d_idx = header.index(schema.date_column)
    v_idx = header.index(schema.value_column)

    rows: list[tuple[date, float]] = []
    skipped: list[SkippedRow] = []
    seen: dict[date, int] = {}
    reader = csv.reader(handle, delimiter=delimiter)
    for line_number, record in enumerate(reader, start=2):
        if not record or all(not cell.strip() for cell in record):
            continue
        raw = delimiter.join(record)
        if len(record) <= max(d_idx, v_idx):
            skipped.append(SkippedRow(line_number, raw, "too few fields"))
            continue
        try:
            day = schema.parse_date(record[d_idx])
        except ValueError:
            skipped.append(SkippedRow(line_number, raw, "unparseable date"))
            continue
        try:
            value = float(record[v_idx])
        except ValueError:
            skipped.append(SkippedRow(line_number, raw, "unparseable value"))
            continue
        if not math.isfinite(value):
            skipped.append(SkippedRow(line_number, raw, "non-finite value"))
            continue
        if day in seen:
            raise DataError(f"{label}: duplicate date {day.isoformat()} (line {line_number})")
        seen[day] = line_number
        rows.append((day, value))

    if not rows:
        raise DataError(f"{label}: no parseable data rows")
    rows.sort(key=lambda item: item[0])
    return rows, tuple(skipped)


def load_price_series(source, instrument_id: str, schema: CsvSchema | None = None) -> LoadResult:
    """Load a daily price file into a sorted :class:`PriceSeries`.

    Parameters
    ----------
    source
        Path, bytes, or open stream of delimiter-separated text with a
        header row (comma or tab, auto-detected).
    instrument_id
        Label attached to the series.
    schema
        Column names and date format; defaults to ``date``/``price`` in
        ISO format.

    Returns
    -------
    LoadResult
        ``series`` is sorted by date regardless of input order;
        ``skipped`` lists rows that failed to parse. Non-positive prices
        and duplicate dates raise :class:`DataError` naming the date.
    """
    schema = schema or CsvSchema()
    rows, skipped = _read_rows(source, schema, instrument_id)
    dates = tuple(day for day, _ in rows)
    prices = [value for _, value in rows]
    return LoadResult(PriceSeries(instrument_id, dates, np.asarray(prices)), skipped)


def load_rate_series(source, instrument_id: str, schema: CsvSchema | None = None) -> LoadResult:
    """Load a daily rate file (risk-free quotes may be zero or negative)."""
    schema = schema or CsvSchema(value_column="rate")
    rows, skipped = _read_rows(source, schema, instrument_id)
    dates = tuple(day for day, _ in rows)
    values = [value for _, value in rows]
    return LoadResult(ReturnSeries(instrument_id, dates, np.asarray(values)), skipped)


def log_returns(series: PriceSeries) -> ReturnSeries:
    """Natural-log daily returns, attached to the later date.

    ``return_t = ln(price_t / price_{t-1})``; the result is one
    observation shorter than the input.
    """
    if len(series) < 2:
        raise DataError(f"{series.instrument_id}: need at least 2 observations for returns")
    values = np.diff(np.log(series.prices))
    return ReturnSeries(series.instrument_id, series.dates[1:], values)


def excess_returns(returns: ReturnSeries, risk_free: ReturnSeries) -> ReturnSeries:
    """Pointwise ``returns - risk_free`` on an identical date axis."""
    if returns.dates != risk_free.dates:
        for a, b in zip(returns.dates, risk_free.dates):
            if a != b:
                raise DataError(
                    f"{returns.instrument_id}: date axis mismatch with "
                    f"{risk_free.instrument_id} starting at {min(a, b).isoformat()}"
                )
        raise DataError(
            f"{returns.instrument_id}: date axis length differs from {risk_free.instrument_id}"
        )
    return ReturnSeries(returns.instrument_id, returns.dates, returns.values - risk_free.values)


def annualized_percent_to_daily(series: ReturnSeries, day_count: int = 252) -> ReturnSeries:
    """Convert an annualized percentage quote to a per-day rate.

    Divides by 100 and by ``day_count`` (default 252 trading days).
    """
    if day_count < 1:
        raise DataError("day_count must be positive")
    return ReturnSeries(series.instrument_id, series.dates, series.values / 100.0 / day_count)


def align(
    series: Sequence[ReturnSeries],
    calendars: Sequence[TradingCalendar] | None = None,
    policy: str = INTERSECTION,
    fill_limit: int = 3,
) -> AlignedPanel:
    """Place several return series on one shared date axis.

    Policies
    --------
    ``intersection``
        Axis is the set intersection of all date axes, order preserved.
    ``forward-fill-limited``
        Axis is the first (anchor) series' dates; gaps in the other
        series are filled with their most recent value at most
        ``fill_limit`` calendar days old. A longer gap is an error naming
        the instrument and date.

    When ``calendars`` is given, each series is checked against the
    matching calendar before alignment.
    """
    if not series:
        raise DataError("align requires at least one series")
    names = [s.instrument_id for s in series]
    if len(set(names)) != len(names):
        raise DataError(f"duplicate instrument ids in alignment input: {names}")
    if calendars is not None:
        if len(calendars) != len(series):
            raise DataError("calendars list must match the series list")
        for s, cal in zip(series, calendars):
            for day in s.dates:
                if day not in cal:
                    raise DataError(
                        f"{s.instrument_id}: {day.isoformat()} is not a {cal.name} trading day"
                    )

    if policy == INTERSECTION:
        common = set(series[0].dates)
        for s in series[1:]:
            common &= set(s.dates)
        if not common:
            raise DataError("alignment produced an empty intersection of date axes")
        axis = tuple(day for day in series[0].dates if day in common)
        columns = {}
        for s in series:
            lookup = dict(zip(s.dates, s.values))
            columns[s.instrument_id] = np.asarray([lookup[day] for day in axis])
        return AlignedPanel(axis, columns, INTERSECTION)

    if policy == FORWARD_FILL:
        if fill_limit < 1:
            raise DataError("fill_limit must be at least 1")
        anchor = series[0]
        axis = anchor.dates
        columns = {anchor.instrument_id: np.asarray(anchor.values)}
        for s in series[1:]:
            filled = np.empty(len(axis))
            pos = 0  # observations of s consumed so far
            for i, day in enumerate(axis):
                while pos < len(s.dates) and s.dates[pos] <= day:
                    pos += 1
                if pos == 0:
                    raise DataError(
                        f"{s.instrument_id}: no observation on or before {day.isoformat()}"
                    )
                last = s.dates[pos - 1]
                age = (day - last).days
                if age > fill_limit:
                    raise DataError(
                        f"{s.instrument_id}: gap of {age} days at {day.isoformat()} "
                        f"exceeds the forward-fill limit of {fill_limit}"
                    )
                filled[i] = s.values[pos - 1]
            columns[s.instrument_id] = filled
        return AlignedPanel(axis, columns, f"{FORWARD_FILL}({fill_limit})")

    raise DataError(f"unknown alignment policy {policy!r}")


def export_panel(panel: AlignedPanel, destination, delimiter: str = ",") -> None:
    """Write a panel as delimited text: ISO dates, 10 significant digits."""
    own = isinstance(destination, (str, Path))
    handle = open(destination, "w", encoding="utf-8", newline="") if own else destination
    try:
        names = list(panel.columns)
        writer = csv.writer(handle, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["date", *names])
        for i, day in enumerate(panel.dates):
            writer.writerow(
                [day.isoformat(), *(format(panel.columns[n][i], ".10g") for n in names)]
            )
    finally:
        if own:
            handle.close()
