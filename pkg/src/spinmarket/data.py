"""Price data ingestion, serialization and synthetic generation.

Two file grammars are accepted:

* ticks: header ``timestamp,price,volume``; epoch-millisecond integer
  timestamps, strictly increasing; price > 0; volume >= 0.
* end of day: header ``date,open,high,low,close,volume``; ``YYYY-MM-DD``
  dates, strictly increasing; all prices > 0 with low <= open, close <= high;
  volume >= 0.

Row numbers in errors are 1-based file lines, so the first data row is row 2.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
import os
from dataclasses import dataclass

import numpy as np

from .csvio import fmt_cell
from .errors import InvalidParameterError, ParseError
from .thermometer import PriceSeries

TICK_HEADER = ("timestamp", "price", "volume")
OHLCV_HEADER = ("date", "open", "high", "low", "close", "volume")
_EPOCH = _dt.date(1970, 1, 1)


@dataclass(frozen=True)
class TickRecord:
    timestamp: int
    price: float
    volume: float


@dataclass(frozen=True)
class OhlcvRecord:
    date: _dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float

    @property
    def timestamp(self) -> int:
        """Epoch milliseconds of the date's UTC midnight."""
        return (self.date - _EPOCH).days * 86_400_000


def _rows(path, header: tuple[str, ...]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != header:
            raise ParseError(f"expected header {','.join(header)}", row=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=line)
            yield line, [c.strip() for c in row]


def _real(text: str, name: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{name} {text!r} is not a number", row=line) from None
    if not math.isfinite(value):
        raise ParseError(f"{name} must be finite", row=line)
    return value


def read_tick_records(path) -> list[TickRecord]:
    records: list[TickRecord] = []
    for line, (ts_text, price_text, vol_text) in _rows(path, TICK_HEADER):
        try:
            ts = int(ts_text)
        except ValueError:
            raise ParseError(f"timestamp {ts_text!r} is not an integer", row=line) from None
        price = _real(price_text, "price", line)
        volume = _real(vol_text, "volume", line)
        if price <= 0:
            raise ParseError(f"price must be positive, got {price_text}", row=line)
        if volume < 0:
            raise ParseError(f"volume must be non-negative, got {vol_text}", row=line)
        if records and ts <= records[-1].timestamp:
            raise ParseError("timestamps must be strictly increasing", row=line)
        records.append(TickRecord(ts, price, volume))
    if not records:
        raise ParseError("no data rows", row=2)
    return records


def read_ohlcv_records(path) -> list[OhlcvRecord]:
    records: list[OhlcvRecord] = []
    for line, (date_text, *fields) in _rows(path, OHLCV_HEADER):
        try:
            date = _dt.date.fromisoformat(date_text)
        except ValueError:
            raise ParseError(f"date {date_text!r} is not YYYY-MM-DD", row=line) from None
        o, h, lo, c, v = (_real(t, n, line) for t, n in zip(fields, OHLCV_HEADER[1:]))
        if min(o, h, lo, c) <= 0:
            raise ParseError("prices must be positive", row=line)
        if v < 0:
            raise ParseError("volume must be non-negative", row=line)
        if not (lo <= o <= h and lo <= c <= h):
            raise ParseError("need low <= open, close <= high", row=line)
        if records and date <= records[-1].date:
            raise ParseError("dates must be strictly increasing", row=line)
        records.append(OhlcvRecord(date, o, h, lo, c, v))
    if not records:
        raise ParseError("no data rows", row=2)
    return records


def ticks_to_series(records: list[TickRecord]) -> PriceSeries:
    return PriceSeries(
        np.array([r.timestamp for r in records], dtype=np.int64),
        np.array([r.price for r in records]),
        np.array([r.volume for r in records]),
    )


def ohlcv_to_series(records: list[OhlcvRecord]) -> PriceSeries:
    """Close prices stamped at each date, keeping the opens."""
    return PriceSeries(
        np.array([r.timestamp for r in records], dtype=np.int64),
        np.array([r.close for r in records]),
        np.array([r.volume for r in records]),
        opens=np.array([r.open for r in records]),
    )


def parse_tick_csv(path) -> PriceSeries:
    return ticks_to_series(read_tick_records(path))


def parse_ohlcv_csv(path) -> PriceSeries:
    return ohlcv_to_series(read_ohlcv_records(path))


def _write(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_tick_csv(path, records: list[TickRecord]) -> None:
    _write(path, TICK_HEADER, ((str(r.timestamp), fmt_cell(r.price), fmt_cell(r.volume)) for r in records))


def write_ohlcv_csv(path, records: list[OhlcvRecord]) -> None:
    _write(
        path,
        OHLCV_HEADER,
        (
            (r.date.isoformat(), *(fmt_cell(x) for x in (r.open, r.high, r.low, r.close, r.volume)))
            for r in records
        ),
    )


def series_to_tick_records(series: PriceSeries) -> list[TickRecord]:
    volumes = series.volumes if series.volumes is not None else np.zeros(len(series))
    return [
        TickRecord(int(t), float(p), float(v))
        for t, p, v in zip(series.timestamps.tolist(), series.prices.tolist(), volumes.tolist())
    ]


def detect_format(path) -> str:
    """``"ticks"`` or ``"ohlcv"`` from the header line."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
    cols = tuple(c.strip() for c in first.split(","))
    if cols == TICK_HEADER:
        return "ticks"
    if cols == OHLCV_HEADER:
        return "ohlcv"
    raise ParseError(f"unrecognised header in {os.fspath(path)!r}", row=1)


def parse_price_csv(path) -> PriceSeries:
    return parse_tick_csv(path) if detect_format(path) == "ticks" else parse_ohlcv_csv(path)


def generate_gbm(
    s0: float,
    mu: float,
    sigma: float,
    dt: float,
    n: int,
    seed: int,
    start_ms: int = 0,
    step_ms: int = 60_000,
) -> PriceSeries:
    """Geometric Brownian motion sampled at ``n`` equally spaced instants.

    ``log p_k = log s0 + (mu - sigma^2/2) dt k + sigma sqrt(dt) (xi_0 + ... + xi_{k-1})``
    with standard normal ``xi`` from a PCG64 generator seeded by ``seed``.
    """
    if not (s0 > 0 and math.isfinite(s0)):
        raise InvalidParameterError("s0 must be positive")
    if not (sigma >= 0 and math.isfinite(sigma)) or not math.isfinite(mu):
        raise InvalidParameterError("mu must be finite and sigma non-negative")
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidParameterError("dt must be positive")
    if n < 1:
        raise InvalidParameterError("n must be at least 1")
    if step_ms < 1:
        raise InvalidParameterError("step_ms must be positive")
    k = np.arange(n, dtype=float)
    log_p = (mu - 0.5 * sigma * sigma) * dt * k
    if sigma > 0:
        xi = np.random.Generator(np.random.PCG64(seed)).standard_normal(n - 1)
        log_p[1:] += sigma * math.sqrt(dt) * np.cumsum(xi)
    stamps = start_ms + step_ms * np.arange(n, dtype=np.int64)
    return PriceSeries(stamps, s0 * np.exp(log_p))
