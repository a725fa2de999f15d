"""CSV serialization helpers.

Floats are written with 17 significant digits so that every value round-trips
exactly. Infinities are written as ``+inf``/``-inf`` and absent values
(NaN / None) as empty fields.
"""

from __future__ import annotations

import io
import math
import os
from typing import Iterable, Sequence


def fmt_float(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return format(x, ".17g")


def fmt_cell(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int) or (hasattr(x, "dtype") and x.dtype.kind in "iu"):
        return str(int(x))
    return fmt_float(x)


def parse_float(text: str) -> float:
    """Inverse of :func:`fmt_float`; an empty field parses as NaN."""
    text = text.strip()
    if text == "":
        return math.nan
    return float(text)


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt_cell(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    text = render_csv(header, rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
