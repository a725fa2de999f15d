"""End-to-end market run: ingest, temperature, renormalize, detect, emit.

A run writes into a scratch directory next to the requested output and is
renamed into place only after every stage succeeded, so a failed run leaves
nothing behind. The manifest lists inputs with their checksums, the seed,
every parameter and a checksum per output file. It holds no clock time and
no output location, so rerunning a manifest reproduces it byte for byte.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import shutil
import tempfile
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import InsufficientDataError, InvalidParameterError, ParseError, SpinMarketError, StageError
from .data import detect_format, generate_gbm, parse_ohlcv_csv, parse_tick_csv
from .renorm import DAY_MS, BlockPartition, TemperatureStack, read_stack_csvs, temperature_stack
from .signals import detect_transitions, write_events_csv
from .svgplot import PlotData, Trace, emit_plot
from .thermometer import PriceSeries, estimate_temperature

SEED_ENV = "SPINMARKET_SEED"
STAGES = ("ingest", "temperature", "renormalize", "detect", "emit")


@dataclass
class RunConfig:
    """Parameters of one pipeline run.

    ``input`` is a tick or end-of-day CSV path, a directory holding an
    exported temperature stack (detection only), or ``gbm`` for a synthetic
    series drawn with ``seed``. ``partitions`` is a comma list with one entry
    per renormalization step: ``day``, ``period:<ms>`` or ``fixed:<size>``;
    the last entry repeats if ``levels`` asks for more steps.
    """

    input: str = ""
    out: str = ""
    input_format: str = "auto"
    levels: int = 3
    partitions: str = "day,fixed:5"
    window: int = 32
    dt: float = 1.0
    dt_mode: str = "block_duration"
    weighting: str = "volume"
    open_close_only: bool = False
    trend_window: int = 16
    threshold: float = 0.05
    sign_method: str = "volatility_trend"
    tolerance: float = 0.15
    floor: float = 1e-12
    seed: int = 0
    gbm_n: int = 20_000
    gbm_s0: float = 100.0
    gbm_mu: float = 0.0
    gbm_sigma: float = 0.2
    gbm_dt: float = 1.0 / 252 / 100
    gbm_step_ms: int = 864_000

    def validate(self) -> None:
        if not self.input:
            raise InvalidParameterError("no input given")
        if self.input_format not in ("auto", "ticks", "ohlcv", "stack"):
            raise InvalidParameterError(f"input_format must be auto, ticks, ohlcv or stack, not {self.input_format!r}")
        if self.levels < 2:
            raise InvalidParameterError("levels must be at least 2 for detection")
        if self.window < 3:
            raise InvalidParameterError("window must be at least 3")
        if self.trend_window < 3:
            raise InvalidParameterError("trend_window must be at least 3")
        for name in ("dt", "tolerance", "floor", "gbm_s0", "gbm_dt"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidParameterError(f"{name} must be positive")
        if not (self.gbm_sigma >= 0 and math.isfinite(self.gbm_sigma)):
            raise InvalidParameterError("gbm_sigma must be non-negative")
        if self.gbm_n < 2 or self.gbm_step_ms < 1:
            raise InvalidParameterError("gbm_n must be at least 2 and gbm_step_ms positive")
        if self.dt_mode not in ("block_duration", "diffusive"):
            raise InvalidParameterError(f"unknown dt_mode {self.dt_mode!r}")
        if self.weighting not in ("volume", "uniform"):
            raise InvalidParameterError(f"unknown weighting {self.weighting!r}")
        if self.sign_method not in ("volatility_trend", "always_positive"):
            raise InvalidParameterError(f"unknown sign_method {self.sign_method!r}")
        partition_specs(self.partitions, self.levels)

    def parameters(self) -> dict[str, Any]:
        """Every field except the output location."""
        out = dataclasses.asdict(self)
        out.pop("out")
        return out


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, text: Any) -> Any:
    if name not in _FIELDS:
        raise InvalidParameterError(f"unknown config key {name!r}")
    kind = type(getattr(RunConfig(), name))
    if not isinstance(text, str):
        value = text
    elif kind is bool:
        low = text.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise InvalidParameterError(f"{name}: expected a boolean, got {text!r}")
        value = low in ("true", "1", "yes")
    else:
        try:
            value = kind(text.strip())
        except ValueError:
            raise InvalidParameterError(f"{name}: cannot read {text!r} as {kind.__name__}") from None
    return value


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{os.fspath(path)}: expected key = value", row=line_no)
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _FIELDS:
                raise ParseError(f"{os.fspath(path)}: unknown key {key!r}", row=line_no)
            values[key] = value
    return values


def build_config(
    config_path=None,
    overrides: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    """Defaults, then the config file, then ``SPINMARKET_SEED``, then ``overrides``."""
    environ = os.environ if environ is None else environ
    merged: dict[str, Any] = {}
    if config_path is not None:
        merged.update(read_config_file(config_path))
        # relative input paths are resolved against the config file
        inp = merged.get("input")
        if inp and inp != "gbm" and not os.path.isabs(inp):
            merged["input"] = os.path.join(os.path.dirname(os.fspath(config_path)), inp)
    if environ.get(SEED_ENV, "").strip():
        merged["seed"] = environ[SEED_ENV]
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in merged.items()})
    cfg.validate()
    return cfg


def partition_specs(text: str, levels: int) -> list[str]:
    specs = [s.strip() for s in text.split(",") if s.strip()]
    if not specs:
        raise InvalidParameterError("partitions is empty")
    for s in specs:
        kind, _, arg = s.partition(":")
        if kind == "day" and not arg:
            continue
        if kind in ("fixed", "period") and arg.isdigit() and int(arg) >= 1:
            continue
        raise InvalidParameterError(f"bad partition spec {s!r}")
    steps = levels - 1
    return (specs + [specs[-1]] * steps)[:steps]


def make_partition(spec: str, series: PriceSeries) -> BlockPartition:
    kind, _, arg = spec.partition(":")
    if kind == "day":
        return BlockPartition.by_period(series.timestamps, DAY_MS)
    if kind == "period":
        return BlockPartition.by_period(series.timestamps, int(arg))
    return BlockPartition.fixed(len(series), int(arg))


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def ingest(cfg: RunConfig) -> tuple[PriceSeries | TemperatureStack, list[dict[str, str]]]:
    """Price series from a file or the generator, or a previously exported stack."""
    if cfg.input == "gbm":
        series = generate_gbm(
            cfg.gbm_s0, cfg.gbm_mu, cfg.gbm_sigma, cfg.gbm_dt, cfg.gbm_n, cfg.seed, step_ms=cfg.gbm_step_ms
        )
        # synthetic ticks trade one unit each
        series.volumes = np.ones(len(series))
        return series, []
    fmt = cfg.input_format
    if fmt == "auto":
        fmt = "stack" if os.path.isdir(cfg.input) else detect_format(cfg.input)
    if fmt == "stack":
        stack = read_stack_csvs(cfg.input)
        files = sorted(f for f in os.listdir(cfg.input) if f.startswith(("temperature_level", "alignment")))
        inputs = [
            {"path": os.path.join(os.fspath(cfg.input), f), "format": fmt, "sha256": _sha256(os.path.join(cfg.input, f))}
            for f in files
        ]
        return stack, inputs
    series = parse_tick_csv(cfg.input) if fmt == "ticks" else parse_ohlcv_csv(cfg.input)
    return series, [{"path": os.fspath(cfg.input), "format": fmt, "sha256": _sha256(cfg.input)}]


def build_partitions(specs: list[str], series: PriceSeries) -> list[BlockPartition]:
    """One partition per step; later steps see the block-close timestamps of the previous level."""
    partitions = []
    stamps = series.timestamps
    for spec in specs:
        part = make_partition(spec, PriceSeries(stamps, np.ones(len(stamps))))
        partitions.append(part)
        stamps = stamps[[b - 1 for _, b in part.boundaries]]
    return partitions


def build_stack(cfg: RunConfig, series: PriceSeries) -> TemperatureStack:
    partitions = build_partitions(partition_specs(cfg.partitions, cfg.levels), series)
    return temperature_stack(
        series,
        partitions,
        window=cfg.window,
        dt_per_level=[cfg.dt],
        weighting=cfg.weighting,
        open_close_only=cfg.open_close_only,
        dt_mode=cfg.dt_mode,
        trend_window=cfg.trend_window,
        threshold=cfg.threshold,
        sign_method=cfg.sign_method,
    )


def stack_plot_data(stack: TemperatureStack) -> PlotData:
    t0 = stack.levels[0].timestamps[0]
    traces = [
        Trace(f"T{k}", (lvl.timestamps - t0) / DAY_MS, lvl.temperatures) for k, lvl in enumerate(stack.levels)
    ]
    return PlotData(traces, "temperature by renormalization level", "days", "T")


@dataclass
class RunResult:
    out_dir: str
    n_events: int
    manifest: dict


def run_pipeline(cfg: RunConfig, force: bool = False) -> RunResult:
    """Run every stage and publish the run directory ``cfg.out``.

    Raises:
        StageError: naming the failing stage; nothing is left on disk.
    """
    stage = "ingest"
    scratch = None
    try:
        cfg.validate()
        if not cfg.out:
            raise InvalidParameterError("no output directory given")
        out = os.path.abspath(cfg.out)
        if os.path.exists(out) and not (force and os.path.isdir(out)):
            raise InvalidParameterError(f"output {cfg.out!r} already exists")
        loaded, inputs = ingest(cfg)

        if isinstance(loaded, TemperatureStack):
            stack = loaded
        else:
            stage = "temperature"
            if len(loaded) < cfg.window:
                raise InsufficientDataError(f"input has {len(loaded)} samples, fewer than window={cfg.window}")
            estimate_temperature(loaded, cfg.window, cfg.dt, cfg.trend_window, cfg.threshold, cfg.sign_method)

            stage = "renormalize"
            stack = build_stack(cfg, loaded)

        stage = "detect"
        events = detect_transitions(stack, cfg.tolerance, cfg.floor)

        stage = "emit"
        parent = os.path.dirname(out)
        os.makedirs(parent, exist_ok=True)
        scratch = tempfile.mkdtemp(prefix=".spinmarket-", dir=parent)
        names = stack.write_csvs(scratch)
        write_events_csv(os.path.join(scratch, "events.csv"), events, len(stack))
        names.append("events.csv")
        svg, csv_path = emit_plot(stack_plot_data(stack), "stack", os.path.join(scratch, "plot_stack.svg"))
        names += [os.path.basename(svg), os.path.basename(csv_path)]
        manifest = {
            "inputs": inputs,
            "seeds": {"seed": cfg.seed},
            "parameters": cfg.parameters(),
            "stages": list(STAGES),
            "levels": [
                {"level": k, "samples": len(lvl.timestamps), "dt": stack.dts[k] if k < len(stack.dts) else None}
                for k, lvl in enumerate(stack.levels)
            ],
            "events": len(events),
            "outputs": {name: _sha256(os.path.join(scratch, name)) for name in sorted(names)},
        }
        with open(os.path.join(scratch, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.chmod(scratch, 0o755)
        if os.path.exists(out):
            shutil.rmtree(out)
        os.rename(scratch, out)
        scratch = None
        return RunResult(out, len(events), manifest)
    except (SpinMarketError, OSError, ValueError, ArithmeticError) as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(stage, exc) from exc
    finally:
        if scratch is not None:
            shutil.rmtree(scratch, ignore_errors=True)
