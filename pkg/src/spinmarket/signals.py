"""Coincidence detector over a temperature stack.

A renormalization fixed point is a temperature that the coarse-graining
leaves unchanged, so instants where the raw and renormalized temperatures
agree are flagged as candidate phase transitions (trend changes).

Every level is read "as of" each level-0 instant: the value used is that
of the latest level-k sample whose block has already closed. No value from
the future can enter an event.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .csvio import write_csv
from .errors import InvalidParameterError
from .renorm import TemperatureStack

DEFAULT_TOLERANCE = 0.15
DEFAULT_FLOOR = 1e-12


@dataclass
class SignalEvent:
    timestamp: int
    level_values: list[float]
    relative_spread: float
    note: str = "coincidence"
    # index into each level's series of the sample that supplied the value
    source_indices: list[int] = field(default_factory=list)


def relative_spread(values, floor: float = DEFAULT_FLOOR) -> float:
    values = np.asarray(values, dtype=float)
    return float((values.max() - values.min()) / max(abs(values.mean()), floor))


def as_of_values(stack: TemperatureStack) -> tuple[np.ndarray, np.ndarray]:
    """Level values and source indices seen at each level-0 instant.

    Returns ``(values, sources)`` of shape (n_levels, n0). Entries are NaN
    (and source -1) where a level has no closed sample yet or the sample is
    still in warm-up.
    """
    n0 = len(stack.levels[0].temperatures)
    values = np.full((len(stack), n0), np.nan)
    sources = np.full((len(stack), n0), -1, dtype=np.int64)
    instants = np.arange(n0)
    for k, (level, align) in enumerate(zip(stack.levels, stack.alignment)):
        closes = np.asarray(align)[:, 1]
        j = np.searchsorted(closes, instants, side="right") - 1
        ok = j >= 0
        values[k, ok] = level.temperatures[j[ok]]
        sources[k, ok] = j[ok]
    return values, sources


def qualifying_instants(
    stack: TemperatureStack, tolerance: float = DEFAULT_TOLERANCE, floor: float = DEFAULT_FLOOR
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Mask of level-0 instants satisfying the coincidence rule, plus spreads, values, sources."""
    if len(stack) < 2:
        raise InvalidParameterError("need at least two levels to compare")
    if not tolerance > 0:
        raise InvalidParameterError("tolerance must be positive")
    if not floor > 0:
        raise InvalidParameterError("floor must be positive")
    values, sources = as_of_values(stack)
    complete = ~np.isnan(values).any(axis=0)
    spread = np.full(values.shape[1], np.nan)
    v = values[:, complete]
    spread[complete] = (v.max(axis=0) - v.min(axis=0)) / np.maximum(np.abs(v.mean(axis=0)), floor)
    same_sign = np.zeros(values.shape[1], dtype=bool)
    same_sign[complete] = (v > 0).all(axis=0) | (v < 0).all(axis=0)
    mask = complete & same_sign & (spread < tolerance)
    return mask, spread, values, sources


def detect_transitions(
    stack: TemperatureStack,
    tolerance: float = DEFAULT_TOLERANCE,
    floor: float = DEFAULT_FLOOR,
    debounce: bool = True,
) -> list[SignalEvent]:
    """Events where all levels share a sign and their relative spread is below ``tolerance``.

    With ``debounce`` a run of consecutive qualifying instants yields one
    event at its first instant.
    """
    mask, spread, values, sources = qualifying_instants(stack, tolerance, floor)
    idx = np.nonzero(mask)[0]
    if debounce and idx.size:
        starts = np.concatenate([[True], np.diff(idx) > 1])
        idx = idx[starts]
    stamps = stack.levels[0].timestamps
    return [
        SignalEvent(
            int(stamps[i]),
            values[:, i].tolist(),
            float(spread[i]),
            source_indices=sources[:, i].tolist(),
        )
        for i in idx
    ]


def events_csv_rows(events: list[SignalEvent]):
    return [(e.timestamp, e.relative_spread, *e.level_values) for e in events]


def write_events_csv(path, events: list[SignalEvent], n_levels: int) -> None:
    header = ["timestamp", "spread"] + [f"T{k}" for k in range(n_levels)]
    write_csv(path, header, events_csv_rows(events))
