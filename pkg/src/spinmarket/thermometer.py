"""Signed effective temperature of a price series.

The price is read as the position of a geometric Brownian particle; its
temperature magnitude is the diffusion coefficient of log-price, i.e. the
unbiased variance of log-returns per unit time over a trailing window. The
sign is negative while that magnitude trends upward faster than a threshold
(the unstable, positive-energy regime) and positive otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numba import njit

from .csvio import write_csv
from .errors import InsufficientDataError, InvalidParameterError

DEFAULT_WINDOW = 32
DEFAULT_TREND_WINDOW = 16
DEFAULT_THRESHOLD = 0.05

SignMethod = Literal["volatility_trend", "always_positive"]


@dataclass
class PriceSeries:
    """Timestamped prices at some renormalization level (0 = raw).

    ``timestamps`` are epoch milliseconds, strictly increasing. ``opens`` is
    kept for end-of-day data so that open/close renormalization can use the
    session open of a block's first row.
    """

    timestamps: np.ndarray
    prices: np.ndarray
    volumes: np.ndarray | None = None
    level: int = 0
    opens: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.prices = np.asarray(self.prices, dtype=float)
        if self.timestamps.ndim != 1 or self.timestamps.shape != self.prices.shape:
            raise InvalidParameterError("timestamps and prices must be 1-D and the same length")
        if np.any(np.diff(self.timestamps) <= 0):
            raise InvalidParameterError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise InvalidParameterError("prices must be finite and positive")
        if self.volumes is not None:
            self.volumes = np.asarray(self.volumes, dtype=float)
            if self.volumes.shape != self.prices.shape:
                raise InvalidParameterError("volumes must match prices in length")
            if not np.all(np.isfinite(self.volumes)) or np.any(self.volumes < 0):
                raise InvalidParameterError("volumes must be finite and non-negative")
        if self.opens is not None:
            self.opens = np.asarray(self.opens, dtype=float)
            if self.opens.shape != self.prices.shape:
                raise InvalidParameterError("opens must match prices in length")
        if self.level < 0:
            raise InvalidParameterError("level must be non-negative")

    def __len__(self) -> int:
        return len(self.prices)

    def scaled(self, factor: float) -> "PriceSeries":
        return PriceSeries(
            self.timestamps,
            self.prices * factor,
            self.volumes,
            self.level,
            None if self.opens is None else self.opens * factor,
        )

    def to_csv(self, path) -> None:
        write_csv(path, ["timestamp", "price"], zip(self.timestamps.tolist(), self.prices.tolist()))


@dataclass
class TemperatureSeries:
    """Signed temperatures aligned with a price series; warm-up entries are NaN."""

    timestamps: np.ndarray
    temperatures: np.ndarray
    level: int
    window: int
    sign_method: SignMethod = "volatility_trend"

    @property
    def abs_temperatures(self) -> np.ndarray:
        return np.abs(self.temperatures)

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.temperatures)

    def to_csv(self, path) -> None:
        write_csv(
            path,
            ["timestamp", "temperature", "level"],
            [(ts, t, self.level) for ts, t in zip(self.timestamps.tolist(), self.temperatures.tolist())],
        )


def log_returns(series: PriceSeries) -> tuple[np.ndarray, np.ndarray]:
    """ln(p[i+1]/p[i]), stamped with the later instant."""
    if len(series) < 2:
        raise InsufficientDataError("need at least two prices for a return")
    p = series.prices
    return series.timestamps[1:], np.log(p[1:] / p[:-1])


@njit(cache=True)
def _rolling_sum_sq(r, m):
    """Sum of squared deviations over each length-m window of r.

    Values are shifted by the window's first element before the two-pass
    sum, so a window of identical returns gives exactly zero.
    """
    n_out = r.shape[0] - m + 1
    out = np.empty(n_out)
    for k in range(n_out):
        base = r[k]
        mean = 0.0
        for j in range(m):
            mean += r[k + j] - base
        mean /= m
        ss = 0.0
        for j in range(m):
            d = (r[k + j] - base) - mean
            ss += d * d
        out[k] = ss
    return out


def assign_sign(
    abs_temps,
    trend_window: int = DEFAULT_TREND_WINDOW,
    threshold: float = DEFAULT_THRESHOLD,
) -> np.ndarray:
    """Temperature signs from the trend of |T|.

    At index t the least-squares slope of |T| over the trailing
    ``trend_window`` values is divided by their mean; the sign is -1 when
    that exceeds ``threshold`` and +1 otherwise. Leading entries, windows
    containing NaN and all-zero windows are +1.
    """
    if trend_window < 3:
        raise InvalidParameterError("trend_window must be at least 3")
    y = np.asarray(abs_temps, dtype=float)
    signs = np.ones(y.shape[0], dtype=np.int64)
    if y.shape[0] < trend_window:
        return signs
    win = np.lib.stride_tricks.sliding_window_view(y, trend_window)
    x = np.arange(trend_window, dtype=float) - (trend_window - 1) / 2.0
    slope = (win @ x) / float(x @ x)
    mean = win.mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = slope / mean
    negative = np.isfinite(rel) & (mean > 0) & (rel > threshold)
    signs[trend_window - 1 :][negative] = -1
    return signs


def estimate_temperature(
    series: PriceSeries,
    window: int = DEFAULT_WINDOW,
    dt: float = 1.0,
    trend_window: int = DEFAULT_TREND_WINDOW,
    threshold: float = DEFAULT_THRESHOLD,
    sign_method: SignMethod = "volatility_trend",
) -> TemperatureSeries:
    """Signed effective temperature over a trailing window of ``window`` prices.

    |T| at price index i is the unbiased variance of the ``window - 1``
    log-returns ending at i, divided by ``dt``. The first ``window - 1``
    entries are NaN.
    """
    if window < 3:
        raise InvalidParameterError("window must be at least 3 samples")
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidParameterError("dt must be positive")
    if sign_method not in ("volatility_trend", "always_positive"):
        raise InvalidParameterError(f"unknown sign_method {sign_method!r}")
    n = len(series)
    temps = np.full(n, np.nan)
    if n >= window:
        _, r = log_returns(series)
        m = window - 1
        temps[window - 1 :] = _rolling_sum_sq(r, m) / ((m - 1) * dt)
        if sign_method == "volatility_trend":
            temps = temps * assign_sign(temps, trend_window, threshold) + 0.0
    return TemperatureSeries(series.timestamps.copy(), temps, series.level, window, sign_method)
