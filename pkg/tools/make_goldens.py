"""Freeze golden outputs used by the test suite.

    python tools/make_goldens.py

Run after ``make_fixtures.py``. Writes into ``tests/golden``:

* ``planted_events.csv``: events of the pipeline run on the planted stack.
* ``planted_stack.svg``: stack plot of the planted fixture.
* ``parse_checksums.json``: length and SHA-256 of the parsed arrays of the
  bundled tick and end-of-day samples.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import sys
import tempfile

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.join(HERE, "..", "src"))

from spinmarket.data import parse_ohlcv_csv, parse_tick_csv  # noqa: E402
from spinmarket.pipeline import build_config, run_pipeline, stack_plot_data  # noqa: E402
from spinmarket.renorm import read_stack_csvs  # noqa: E402
from spinmarket.svgplot import emit_plot  # noqa: E402

FIXTURES = os.path.join(HERE, "..", "src", "spinmarket", "fixtures")
GOLDEN = os.path.join(HERE, "..", "tests", "golden")


def array_digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def series_checksum(series) -> dict:
    parts = [series.timestamps.astype("<i8"), series.prices.astype("<f8"), series.volumes.astype("<f8")]
    if series.opens is not None:
        parts.append(series.opens.astype("<f8"))
    return {"length": len(series), "sha256": array_digest(*parts)}


def main() -> None:
    os.makedirs(GOLDEN, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        cfg = build_config(os.path.join(FIXTURES, "planted_pipeline.cfg"), {"out": os.path.join(tmp, "run")}, {})
        run_pipeline(cfg)
        shutil.copy(os.path.join(tmp, "run", "events.csv"), os.path.join(GOLDEN, "planted_events.csv"))
        stack = read_stack_csvs(os.path.join(FIXTURES, "planted_stack"))
        svg, _ = emit_plot(stack_plot_data(stack), "stack", os.path.join(tmp, "planted_stack.svg"))
        shutil.copy(svg, os.path.join(GOLDEN, "planted_stack.svg"))
    sums = {
        "ticks_sample.csv": series_checksum(parse_tick_csv(os.path.join(FIXTURES, "ticks_sample.csv"))),
        "eod_sample.csv": series_checksum(parse_ohlcv_csv(os.path.join(FIXTURES, "eod_sample.csv"))),
    }
    with open(os.path.join(GOLDEN, "parse_checksums.json"), "w") as fh:
        json.dump(sums, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
