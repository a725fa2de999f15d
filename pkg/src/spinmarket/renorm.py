"""Block renormalization of price series and the stack of renormalized temperatures.

Each renormalization step replaces a block of consecutive samples (for
example one trading session) by a single convex combination of its prices,
stamped at the block's close. Weights come from traded volume, so samples
where trading concentrates (opening and closing auctions) dominate.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .csvio import parse_float, write_csv
from .errors import InsufficientDataError, InvalidParameterError, MissingDataError, ParseError
from .thermometer import (
    DEFAULT_THRESHOLD,
    DEFAULT_TREND_WINDOW,
    PriceSeries,
    TemperatureSeries,
    estimate_temperature,
)

DAY_MS = 86_400_000
DEFAULT_LEVELS = 3


@dataclass
class BlockPartition:
    """Half-open index ranges ``[start, stop)`` tiling ``range(n)`` in order."""

    boundaries: list[tuple[int, int]]

    def __post_init__(self):
        self.boundaries = [(int(a), int(b)) for a, b in self.boundaries]
        if not self.boundaries:
            raise InvalidParameterError("partition has no blocks")
        expected = 0
        for a, b in self.boundaries:
            if a != expected:
                raise InvalidParameterError(f"block starting at {a} leaves a gap or overlap (expected {expected})")
            if b <= a:
                raise InvalidParameterError(f"empty block at {a}")
            expected = b
        if self.boundaries[0][0] != 0:
            raise InvalidParameterError("partition must start at index 0")

    @property
    def n_samples(self) -> int:
        return self.boundaries[-1][1]

    def __len__(self) -> int:
        return len(self.boundaries)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b - a for a, b in self.boundaries])

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockPartition":
        edges = np.concatenate([[0], np.cumsum(sizes)])
        return cls(list(zip(edges[:-1].tolist(), edges[1:].tolist())))

    @classmethod
    def fixed(cls, n: int, size: int) -> "BlockPartition":
        """Blocks of ``size`` samples; the last block holds the remainder."""
        if size < 1:
            raise InvalidParameterError("block size must be positive")
        return cls([(a, min(a + size, n)) for a in range(0, n, size)])

    @classmethod
    def singletons(cls, n: int) -> "BlockPartition":
        return cls([(i, i + 1) for i in range(n)])

    @classmethod
    def by_period(cls, timestamps, period_ms: int = DAY_MS, offset_ms: int = 0) -> "BlockPartition":
        """One block per calendar period (UTC days by default)."""
        keys = (np.asarray(timestamps, dtype=np.int64) - offset_ms) // period_ms
        cuts = np.nonzero(np.diff(keys))[0] + 1
        edges = np.concatenate([[0], cuts, [len(keys)]])
        return cls(list(zip(edges[:-1].tolist(), edges[1:].tolist())))

    def check_conforms(self, n: int) -> None:
        if self.n_samples != n:
            raise InvalidParameterError(f"partition covers {self.n_samples} samples, series has {n}")


@dataclass
class WeightProfile:
    """Per-block non-negative weights summing to one.

    With ``open_close_only`` only a block's first and last samples carry
    weight, and the first sample contributes its session open when the
    series has one.
    """

    weights_per_block: list[np.ndarray]
    open_close_only: bool = False

    def check_conforms(self, partition: BlockPartition) -> None:
        if len(self.weights_per_block) != len(partition):
            raise InvalidParameterError("weight profile and partition have different block counts")
        for (a, b), w in zip(partition.boundaries, self.weights_per_block):
            if len(w) != b - a:
                raise InvalidParameterError(f"weights for block [{a}, {b}) have length {len(w)}")
            if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
                raise InvalidParameterError(f"weights for block [{a}, {b}) are not a convex combination")


def _normalize(v: np.ndarray) -> np.ndarray:
    total = math.fsum(v)
    if total <= 0:
        return np.full(len(v), 1.0 / len(v))
    return v / total


def uniform_weights(partition: BlockPartition) -> WeightProfile:
    return WeightProfile([np.full(s, 1.0 / s) for s in partition.sizes])


def block_weights_from_volume(
    series: PriceSeries, partition: BlockPartition, open_close_only: bool = False
) -> WeightProfile:
    """Per-block weights proportional to traded volume.

    A block with zero total volume falls back to uniform weights (or
    half-and-half on open/close).
    """
    if series.volumes is None:
        raise MissingDataError("volume weights need a volume column")
    partition.check_conforms(len(series))
    out = []
    for a, b in partition.boundaries:
        vol = series.volumes[a:b]
        if not open_close_only or b - a == 1:
            out.append(_normalize(vol.astype(float)))
            continue
        w = np.zeros(b - a)
        ends = _normalize(np.array([vol[0], vol[-1]], dtype=float))
        w[0], w[-1] = ends
        out.append(w)
    return WeightProfile(out, open_close_only)


def exact_weighted_mean(weights: Sequence[float], values: Sequence[float]) -> float:
    """sum(w*v) / sum(w) evaluated exactly on the binary inputs, rounded once.

    Doubles are dyadic rationals, so the sums are carried as integers over a
    common power-of-two denominator.
    """
    num_terms = []
    den_terms = []
    for w, v in zip(weights, values):
        nw, dw = float(w).as_integer_ratio()
        nv, dv = float(v).as_integer_ratio()
        num_terms.append((nw * nv, (dw * dv).bit_length() - 1))
        den_terms.append((nw, dw.bit_length() - 1))
    e_num = max(e for _, e in num_terms)
    e_den = max(e for _, e in den_terms)
    num = sum(n << (e_num - e) for n, e in num_terms)
    den = sum(n << (e_den - e) for n, e in den_terms)
    if den == 0:
        raise InvalidParameterError("weights sum to zero")
    return (num << e_den) / (den << e_num)


def renormalize_series(series: PriceSeries, partition: BlockPartition, weights: WeightProfile) -> PriceSeries:
    """One sample per block: weighted price, closing timestamp, summed volume."""
    partition.check_conforms(len(series))
    weights.check_conforms(partition)
    prices = np.empty(len(partition))
    stamps = np.empty(len(partition), dtype=np.int64)
    volumes = None if series.volumes is None else np.empty(len(partition))
    use_open = weights.open_close_only and series.opens is not None
    for k, ((a, b), w) in enumerate(zip(partition.boundaries, weights.weights_per_block)):
        block = series.prices[a:b]
        if use_open and b - a > 1:
            block = block.copy()
            block[0] = series.opens[a]
        value = exact_weighted_mean(w, block)
        prices[k] = min(max(value, block.min()), block.max())
        stamps[k] = series.timestamps[b - 1]
        if volumes is not None:
            volumes[k] = math.fsum(series.volumes[a:b])
    return PriceSeries(stamps, prices, volumes, series.level + 1)


# ---------------------------------------------------------------------------
# Temperature stack
# ---------------------------------------------------------------------------


@dataclass
class TemperatureStack:
    """Temperatures at levels 0, 1, 2, ... with their source series.

    ``alignment[k][j]`` is the inclusive range ``(first, last)`` of level-0
    indices whose prices feed sample j of level k.
    """

    levels: list[TemperatureSeries]
    alignment: list[np.ndarray]
    series: list[PriceSeries] = field(default_factory=list)
    dts: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.levels)

    def write_csvs(self, directory, prefix: str = "") -> list[str]:
        """Per-level price (when known) and temperature files plus the alignment file; returns the names."""
        names = []
        for k, ts in enumerate(self.levels):
            if k < len(self.series):
                pname = f"{prefix}prices_level{k}.csv"
                self.series[k].to_csv(os.path.join(directory, pname))
                names.append(pname)
            tname = f"{prefix}temperature_level{k}.csv"
            ts.to_csv(os.path.join(directory, tname))
            names.append(tname)
        t0 = self.series[0].timestamps if self.series else self.levels[0].timestamps
        rows = []
        for k, (lvl, al) in enumerate(zip(self.levels, self.alignment)):
            for ts, (a, b) in zip(lvl.timestamps.tolist(), al.tolist()):
                rows.append((k, ts, int(t0[a]), int(t0[b])))
        aname = f"{prefix}alignment.csv"
        write_csv(os.path.join(directory, aname), ["level", "ts", "level0_block_start", "level0_block_end"], rows)
        names.append(aname)
        return names


def read_stack_csvs(directory, prefix: str = "") -> TemperatureStack:
    """Load a stack written by :meth:`TemperatureStack.write_csvs`.

    Only the temperature files and the alignment file are needed; price
    series are left empty.
    """
    levels: list[TemperatureSeries] = []
    k = 0
    while os.path.exists(path := os.path.join(directory, f"{prefix}temperature_level{k}.csv")):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != ["timestamp", "temperature", "level"]:
            raise ParseError(f"{path}: unexpected header", row=1)
        body = rows[1:]
        levels.append(
            TemperatureSeries(
                np.array([int(r[0]) for r in body], dtype=np.int64),
                np.array([parse_float(r[1]) for r in body]),
                k,
                window=0,
            )
        )
        k += 1
    if not levels:
        raise MissingDataError(f"no {prefix}temperature_level0.csv in {os.fspath(directory)!r}")
    with open(os.path.join(directory, f"{prefix}alignment.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["level", "ts", "level0_block_start", "level0_block_end"]:
        raise ParseError("alignment.csv: unexpected header", row=1)
    t0 = levels[0].timestamps
    per_level: list[list[tuple[int, int]]] = [[] for _ in levels]
    for line, r in enumerate(rows[1:], start=2):
        lvl = int(r[0])
        if not 0 <= lvl < len(levels):
            raise ParseError(f"alignment.csv: unknown level {lvl}", row=line)
        a, b = np.searchsorted(t0, [int(r[2]), int(r[3])])
        per_level[lvl].append((int(a), int(b)))
    alignment = [np.array(p, dtype=np.int64).reshape(-1, 2) for p in per_level]
    for lvl, al in zip(levels, alignment):
        if len(al) != len(lvl.timestamps):
            raise ParseError(f"alignment.csv: level {lvl.level} has {len(al)} rows, expected {len(lvl.timestamps)}")
    return TemperatureStack(levels, alignment)


def _compose(partition: BlockPartition, weights: WeightProfile, composite: list[tuple[int, np.ndarray]]):
    """Level-0 weight vectors of the renormalized samples."""
    out = []
    for (a, b), w in zip(partition.boundaries, weights.weights_per_block):
        start = composite[a][0]
        stop = composite[b - 1][0] + len(composite[b - 1][1])
        vec = np.zeros(stop - start)
        for i, wi in zip(range(a, b), w):
            s0, v = composite[i]
            vec[s0 - start : s0 - start + len(v)] += wi * v
        out.append((start, vec))
    return out


def _diffusive_dt(composite: list[tuple[int, np.ndarray]]) -> float:
    """Mean variance of consecutive differences for unit-rate Brownian motion on level-0 steps."""
    if len(composite) < 2:
        return float("nan")
    total = 0.0
    for (s1, v1), (s2, v2) in zip(composite[:-1], composite[1:]):
        stop = s2 + len(v2)
        c = np.zeros(stop - s1)
        c[: len(v1)] -= v1
        c[s2 - s1 :] += v2
        tails = np.cumsum(c[::-1])[::-1]
        total += float(np.sum(tails[1:] ** 2))
    return total / (len(composite) - 1)


def temperature_stack(
    series: PriceSeries,
    partitions: Sequence[BlockPartition],
    window: int = 32,
    dt_per_level: Sequence[float] | None = None,
    weighting: Literal["volume", "uniform"] = "volume",
    open_close_only: bool = False,
    dt_mode: Literal["block_duration", "diffusive"] = "block_duration",
    trend_window: int = DEFAULT_TREND_WINDOW,
    threshold: float = DEFAULT_THRESHOLD,
    sign_method: str = "volatility_trend",
) -> TemperatureStack:
    """Temperatures T, T', T'', ... from successive block renormalizations.

    ``partitions[k]`` partitions the level-k series. Entries of
    ``dt_per_level`` fix each level's sampling interval; levels beyond the
    list derive theirs from the level below: ``block_duration`` multiplies by
    the mean block size, ``diffusive`` uses the Brownian variance of
    consecutive block averages so that a pure random walk reads the same
    temperature at every level.
    """
    dts = list(dt_per_level) if dt_per_level is not None else [1.0]
    if not dts:
        dts = [1.0]
    if any(not (d > 0 and math.isfinite(d)) for d in dts):
        raise InvalidParameterError("dt_per_level entries must be positive")
    if len(dts) > len(partitions) + 1:
        raise InvalidParameterError("more dt entries than levels")
    if dt_mode not in ("block_duration", "diffusive"):
        raise InvalidParameterError(f"unknown dt_mode {dt_mode!r}")
    if weighting not in ("volume", "uniform"):
        raise InvalidParameterError(f"unknown weighting {weighting!r}")

    def temperature(ps: PriceSeries, level: int, dt: float) -> TemperatureSeries:
        if len(ps) < window:
            raise InsufficientDataError(f"level {level} has {len(ps)} samples, fewer than window={window}")
        return estimate_temperature(ps, window, dt, trend_window, threshold, sign_method)

    n0 = len(series)
    current = series
    composite = [(i, np.ones(1)) for i in range(n0)]
    alignment = [np.stack([np.arange(n0), np.arange(n0)], axis=1)]
    levels = [temperature(series, 0, dts[0])]
    all_series = [series]
    used_dts = [dts[0]]
    for k, part in enumerate(partitions):
        part.check_conforms(len(current))
        if weighting == "volume" and current.volumes is not None:
            weights = block_weights_from_volume(current, part, open_close_only)
        elif weighting == "volume":
            raise MissingDataError(f"level {k} has no volumes for volume weighting")
        else:
            weights = uniform_weights(part)
        nxt = renormalize_series(current, part, weights)
        prev_align = alignment[-1]
        alignment.append(
            np.array([(prev_align[a][0], prev_align[b - 1][1]) for a, b in part.boundaries], dtype=np.int64)
        )
        composite = _compose(part, weights, composite)
        if k + 1 < len(dts):
            dt = dts[k + 1]
        elif dt_mode == "block_duration":
            dt = used_dts[-1] * float(part.sizes.mean())
        else:
            dt = used_dts[0] * _diffusive_dt(composite)
            if not (dt > 0 and math.isfinite(dt)):
                raise InsufficientDataError(f"level {k + 1} has too few samples to calibrate dt")
        levels.append(temperature(nxt, k + 1, dt))
        all_series.append(nxt)
        used_dts.append(dt)
        current = nxt
    return TemperatureStack(levels, alignment, all_series, used_dts)
