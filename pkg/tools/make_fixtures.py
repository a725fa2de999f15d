"""Regenerate the bundled sample data.

    python tools/make_fixtures.py

Writes into ``src/spinmarket/fixtures``:

* ``ticks_sample.csv``: 120 business days of 5-minute ticks (80 per day) of a
  geometric Brownian price with a U-shaped intraday volume profile.
* ``eod_sample.csv``: 500 business days of OHLCV bars.
* ``planted_stack/``: a three-level temperature stack with two planted
  coincidence windows (see ``planted_stack``).
* ``ticks_pipeline.cfg`` and ``planted_pipeline.cfg``: pipeline configs.

Everything is seeded, so rerunning reproduces the files byte for byte.
"""

from __future__ import annotations

import datetime as dt
import math
import os
import sys

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, "..", "src"))

from spinmarket.data import OhlcvRecord, TickRecord, write_ohlcv_csv, write_tick_csv  # noqa: E402
from spinmarket.renorm import TemperatureStack  # noqa: E402
from spinmarket.thermometer import TemperatureSeries  # noqa: E402

FIXTURES = os.path.join(HERE, "..", "src", "spinmarket", "fixtures")
START = dt.date(2024, 1, 2)

# planted stack geometry: level-0 instants, blocks of 10 then 10
PLANTED_N0 = 1200
PLANTED_BLOCK = 10
PLANTED_T0_MS = 1_704_153_600_000
PLANTED_STEP_MS = 60_000
# epoch e spans level-0 instants [100 e + 99, 100 e + 199); (T0, T1, T2) centres
BASELINE = (1.0, 1.6, 2.4)
PLANTED = {3: (0.8, 0.8, 0.84), 4: (0.9, 0.9, 0.93), 7: (-1.2, -1.2, -1.3), 9: (0.0, 0.0, 0.0)}
PLANTED_NOISE = 0.002


def business_days(n: int) -> list[dt.date]:
    days = np.busday_offset(np.datetime64(START.isoformat()), np.arange(n), roll="forward")
    return [d.astype(object) for d in days]


def make_ticks(path: str) -> None:
    rng = np.random.Generator(np.random.PCG64(20240102))
    per_day, n_days = 80, 120
    sigma, dt_tick = 0.2, 1.0 / (252 * per_day)
    n = per_day * n_days
    log_p = math.log(50.0) + np.cumsum(
        -0.5 * sigma**2 * dt_tick + sigma * math.sqrt(dt_tick) * rng.standard_normal(n)
    )
    prices = np.round(np.exp(log_p), 4)
    u = np.linspace(-1.0, 1.0, per_day)
    profile = 1.0 + 3.0 * u**4
    volumes = np.round(100 * np.tile(profile, n_days) * rng.lognormal(0.0, 0.3, n))
    records = []
    for d, day in enumerate(business_days(n_days)):
        open_ms = int(dt.datetime(day.year, day.month, day.day, 14, 30, tzinfo=dt.timezone.utc).timestamp()) * 1000
        for j in range(per_day):
            i = d * per_day + j
            records.append(TickRecord(open_ms + j * 300_000, float(prices[i]), float(volumes[i])))
    write_tick_csv(path, records)


def make_eod(path: str) -> None:
    rng = np.random.Generator(np.random.PCG64(20240103))
    n, sigma, dt_day = 500, 0.25, 1.0 / 252
    closes = 80.0 * np.exp(np.cumsum(-0.5 * sigma**2 * dt_day + sigma * math.sqrt(dt_day) * rng.standard_normal(n)))
    gaps = np.exp(0.004 * rng.standard_normal(n))
    wicks = np.abs(rng.normal(0.0, 0.006, (n, 2)))
    volumes = np.round(1e6 * rng.lognormal(0.0, 0.4, n))
    records = []
    prev = 80.0
    for k, day in enumerate(business_days(n)):
        o = round(prev * gaps[k], 2)
        c = round(float(closes[k]), 2)
        hi = math.ceil(max(o, c) * (1 + wicks[k, 0]) * 100) / 100
        lo = math.floor(min(o, c) * (1 - wicks[k, 1]) * 100) / 100
        records.append(OhlcvRecord(day, o, hi, lo, c, float(volumes[k])))
        prev = closes[k]
    write_ohlcv_csv(path, records)


def planted_stack(seed: int = 7) -> TemperatureStack:
    """Stack whose as-of level values coincide only inside planted epochs.

    Level k+1 blocks ``PLANTED_BLOCK`` samples of level k, so level-2 blocks
    close at level-0 instants 100 e + 99. A sample is valued by the epoch of
    its closing instant; since every epoch starts at a level-1 and level-2
    close, the as-of value of each level at instant i is the value of
    epoch(i). Levels 0 and 1 carry relative noise of at most 0.2%, level 2
    none. Baseline epochs have a relative spread near 0.8. Epochs 3 and 4
    (spreads about 0.05 and 0.03) form one window with onset 399, epoch 7
    (about 0.08) a second with onset 799. Epoch 9 is all zeros, which the
    same-sign rule never accepts.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    idx0 = np.arange(PLANTED_N0)
    closes = [idx0, idx0[PLANTED_BLOCK - 1 :: PLANTED_BLOCK], idx0[PLANTED_BLOCK**2 - 1 :: PLANTED_BLOCK**2]]
    levels, alignment = [], []
    for k, c in enumerate(closes):
        epoch = np.floor_divide(c - 99, 100)
        centre = np.array([PLANTED.get(int(e), BASELINE)[k] for e in epoch])
        noise = 1.0 + PLANTED_NOISE * rng.uniform(-1.0, 1.0, len(c)) if k < 2 else 1.0
        values = np.where(epoch >= 0, centre * noise, np.nan) + 0.0
        levels.append(TemperatureSeries(PLANTED_T0_MS + PLANTED_STEP_MS * c, values, k, window=0))
        size = PLANTED_BLOCK**k
        alignment.append(np.stack([c - size + 1, c], axis=1))
    return TemperatureStack(levels, alignment)


CONFIGS = {
    "ticks_pipeline.cfg": """\
# intraday ticks: one block per trading day, then weeks of five days
input = ticks_sample.csv
levels = 3
partitions = day,fixed:4
window = 16
trend_window = 8
tolerance = 0.15
dt_mode = diffusive
seed = 0
""",
    "planted_pipeline.cfg": """\
# detection on an exported temperature stack
input = planted_stack
input_format = stack
tolerance = 0.15
""",
}


def main() -> None:
    os.makedirs(os.path.join(FIXTURES, "planted_stack"), exist_ok=True)
    make_ticks(os.path.join(FIXTURES, "ticks_sample.csv"))
    make_eod(os.path.join(FIXTURES, "eod_sample.csv"))
    planted_stack().write_csvs(os.path.join(FIXTURES, "planted_stack"))
    for name, text in CONFIGS.items():
        with open(os.path.join(FIXTURES, name), "w") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
