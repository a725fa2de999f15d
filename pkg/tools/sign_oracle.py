"""Freeze the reference sign vector for a noisy |T| sequence.

    python tools/sign_oracle.py

The |T| sequence is seeded noise around a slowly oscillating level with
two bursts of growth. Signs are computed here with plain Python loops and
exact rational least squares (``fractions.Fraction``), independently of
``spinmarket.thermometer.assign_sign``, and written with the inputs to
``tests/golden/sign_vector.csv``.
"""

from __future__ import annotations

import math
import os
from fractions import Fraction

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "tests", "golden", "sign_vector.csv")
TREND_WINDOW = 16
THRESHOLD = Fraction(1, 20)


def noisy_abs_temperatures(n: int = 400, seed: int = 11) -> list[float]:
    rng = np.random.Generator(np.random.PCG64(seed))
    t = np.arange(n)
    level = 0.04 * (1.0 + 0.3 * np.sin(2 * math.pi * t / 150))
    burst = np.where((t >= 120) & (t < 150), np.exp((t - 120) / 12.0), 1.0)
    burst *= np.where((t >= 300) & (t < 320), np.exp((t - 300) / 8.0), 1.0)
    values = level * burst * rng.lognormal(0.0, 0.05, n)
    return [float(v) for v in values]


def oracle_signs(values: list[float], m: int = TREND_WINDOW, threshold: Fraction = THRESHOLD) -> list[int]:
    signs = [1] * len(values)
    xs = [Fraction(2 * j - (m - 1), 2) for j in range(m)]
    sxx = sum(x * x for x in xs)
    for i in range(m - 1, len(values)):
        ys = [Fraction(v) for v in values[i - m + 1 : i + 1]]
        mean = sum(ys) / m
        if mean <= 0:
            continue
        slope = sum(x * y for x, y in zip(xs, ys)) / sxx
        if slope / mean > threshold:
            signs[i] = -1
    return signs


def main() -> None:
    values = noisy_abs_temperatures()
    signs = oracle_signs(values)
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "w") as fh:
        fh.write("abs_temperature,sign\n")
        for v, s in zip(values, signs):
            fh.write(f"{v!r},{s}\n")


if __name__ == "__main__":
    main()
