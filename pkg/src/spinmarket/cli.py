"""``spinmarket`` command line.

Exit codes: 0 success, 2 invalid input or parameters, 3 numeric failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .csvio import write_csv
from .data import generate_gbm, parse_price_csv, series_to_tick_records, write_tick_csv
from .errors import InvalidParameterError, SpinMarketError
from .pipeline import SEED_ENV, build_config, build_partitions, partition_specs, run_pipeline
from .renorm import read_stack_csvs, temperature_stack
from .signals import detect_transitions, write_events_csv
from .spin_lab import (
    SpinSystem,
    batch_mean_stderr,
    entropy_curve,
    hysteresis_loop,
    magnetocaloric_run,
    population_inversion_run,
    sweep_magnetizations,
)
from .svgplot import PlotData, Trace, emit_plot, sibling_csv_path
from .thermometer import estimate_temperature
from .yang_lee import (
    RenormMap,
    chain_partition_polynomial,
    central_difference,
    dhl_partition_polynomial,
    find_fixed_point,
    find_zeros,
    fixed_point_report,
    julia_inverse_iteration,
)


def _seed(args) -> int:
    """``--seed`` if given, else ``SPINMARKET_SEED``, else 0."""
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV, "").strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise InvalidParameterError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def _check_svg(args) -> None:
    """Refuse an ``--svg`` whose sibling CSV would overwrite ``--out``."""
    svg = getattr(args, "svg", None)
    out = getattr(args, "out", None)
    if svg and out and os.path.abspath(sibling_csv_path(svg)) == os.path.abspath(out):
        raise InvalidParameterError(f"--svg {svg} would overwrite --out {out} with its plot data")


def _maybe_svg(args, data: PlotData, kind: str) -> None:
    if getattr(args, "svg", None):
        emit_plot(data, kind, args.svg)


def cmd_simulate_spins(args) -> int:
    system = SpinSystem.random_start(
        args.n_sites, _seed(args), coupling_j=args.coupling, field_h=args.field, beta=args.beta
    )
    if args.sweeps < 1 or args.burn_in < 0:
        raise InvalidParameterError("need sweeps >= 1 and burn-in >= 0")
    sweep_magnetizations(system, args.burn_in)
    mags = sweep_magnetizations(system, args.sweeps)
    mean, se = batch_mean_stderr(mags, min(20, len(mags)))
    if args.out:
        write_csv(args.out, ["sweep", "magnetization"], enumerate(mags.tolist(), start=1))
    print(f"mean_magnetization={mean:.6g} stderr={se:.3g}")
    return 0


def cmd_entropy_curve(args) -> int:
    curve = entropy_curve(args.coupling, args.field, args.n_sites)
    if args.out:
        curve.to_csv(args.out)
    _maybe_svg(args, PlotData([Trace(f"J={args.coupling:g}", curve.energies, curve.entropies)],
                              "entropy per spin", "energy per spin", "S"), "series")
    print(f"energies={len(curve.points)} max_entropy={curve.entropies.max():.6g}")
    return 0


def cmd_hysteresis(args) -> int:
    system = SpinSystem.random_start(args.n_sites, _seed(args), coupling_j=args.coupling, beta=args.beta)
    loop = hysteresis_loop(
        system, args.h_max, args.steps, args.sweeps_per_step, equilibration_sweeps=args.equilibration
    )
    if args.out:
        loop.to_csv(args.out)
    hd, md = zip(*loop.branch_down)
    hu, mu = zip(*loop.branch_up)
    _maybe_svg(args, PlotData([Trace("down", hd, md), Trace("up", hu, mu)], "hysteresis", "h", "m"), "series")
    print(f"loop_area={loop.loop_area:.6g} stderr={loop.area_stderr:.3g}")
    return 0


def cmd_inversion(args) -> int:
    system = SpinSystem.random_start(args.n_sites, _seed(args), field_h=args.field, beta=args.beta)
    # equilibrate at +h before the recorded run
    sweep_magnetizations(system, args.equilibration)
    trace = population_inversion_run(system, args.flip_time, args.total_steps, args.updates_per_step)
    if args.out:
        trace.to_csv(args.out)
    steps = np.array([s.time_step for s in trace.steps], dtype=float)
    _maybe_svg(args, PlotData([Trace("m", steps, trace.magnetizations)], "population inversion", "step", "m"),
               "series")
    print(f"steps={len(trace.steps)} markers={trace.marker_steps()}")
    return 0


def cmd_magnetocaloric(args) -> int:
    trace = magnetocaloric_run(args.beta, args.field, args.steps)
    if args.out:
        trace.to_csv(args.out)
    print(f"final_temperature={trace.steps[-1].temperature_effective:.6g}")
    return 0


def cmd_partition_zeros(args) -> int:
    if args.kind == "chain":
        poly = chain_partition_polynomial(args.coupling, args.n_sites)
    else:
        poly = dhl_partition_polynomial(args.generations)
    zs = find_zeros(poly, tol=args.tol)
    if args.out:
        zs.to_csv(args.out)
    _maybe_svg(args, PlotData.from_points(zs.zeros, f"{args.kind} zeros"), "scatter")
    print(f"zeros={len(zs.zeros)} residual_bound={zs.residual_bound:.3g}")
    return 0


def cmd_julia(args) -> int:
    cloud = julia_inverse_iteration(
        RenormMap.dhl_ising(), generations=args.generations, cap=args.cap, rng_seed=_seed(args)
    )
    if args.out:
        cloud.to_csv(args.out)
    _maybe_svg(args, PlotData.from_points(cloud.points, "Julia set", "points"), "scatter")
    res = cloud.residuals()
    print(f"points={len(cloud.points)} skipped={cloud.skipped} max_residual={res.max() if len(res) else 0:.3g}")
    return 0


def cmd_fixed_point(args) -> int:
    rmap = RenormMap.dhl_ising()
    t_star, mult = find_fixed_point(rmap, (args.lo, args.hi))
    report = fixed_point_report(t_star, mult)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report)
    fd = abs(central_difference(rmap.apply, t_star))
    sys.stdout.write(report)
    print(f"finite_difference={fd:.10g}")
    return 0


def cmd_temperature(args) -> int:
    series = parse_price_csv(args.input)
    ts = estimate_temperature(series, args.window, args.dt, args.trend_window, args.threshold)
    if args.out:
        ts.to_csv(args.out)
    valid = ts.valid
    med = float(np.median(ts.abs_temperatures[valid])) if valid.any() else float("nan")
    print(f"samples={len(series)} median_abs_temperature={med:.6g}")
    return 0


def cmd_renormalize(args) -> int:
    series = parse_price_csv(args.input)
    parts = build_partitions(partition_specs(args.partitions, args.levels), series)
    stack = temperature_stack(
        series, parts, args.window, [args.dt], args.weighting, args.open_close_only, args.dt_mode
    )
    os.makedirs(args.out_dir, exist_ok=True)
    stack.write_csvs(args.out_dir)
    for k, (lvl, dt) in enumerate(zip(stack.levels, stack.dts)):
        valid = lvl.valid
        med = float(np.median(lvl.abs_temperatures[valid])) if valid.any() else float("nan")
        print(f"level={k} samples={len(lvl.timestamps)} dt={dt:.6g} median_abs_temperature={med:.6g}")
    return 0


def cmd_detect(args) -> int:
    stack = read_stack_csvs(args.stack_dir)
    events = detect_transitions(stack, args.tolerance, args.floor)
    if args.out:
        write_events_csv(args.out, events, len(stack))
    print(f"events={len(events)}")
    return 0


def cmd_gbm(args) -> int:
    series = generate_gbm(args.s0, args.mu, args.sigma, args.dt, args.n, _seed(args), step_ms=args.step_ms)
    series.volumes = np.ones(len(series))
    write_tick_csv(args.out, series_to_tick_records(series))
    print(f"samples={len(series)}")
    return 0


_PIPELINE_FLAGS = (
    ("input", str), ("input_format", str), ("levels", int), ("partitions", str), ("window", int),
    ("dt", float), ("dt_mode", str), ("weighting", str), ("trend_window", int), ("threshold", float),
    ("sign_method", str), ("tolerance", float), ("floor", float), ("seed", int),
)


def cmd_pipeline(args) -> int:
    overrides = {name: getattr(args, name) for name, _ in _PIPELINE_FLAGS}
    overrides["out"] = args.out
    if args.open_close_only:
        overrides["open_close_only"] = True
    cfg = build_config(args.config, overrides)
    result = run_pipeline(cfg, force=args.force)
    print(f"run_dir={result.out_dir} events={result.n_events}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinmarket", description="Spin thermodynamics and market temperatures.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    def seeded(p):
        p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default: ${SEED_ENV} or 0)")

    p = add("simulate-spins", cmd_simulate_spins, "Metropolis sampling of the Ising ring")
    p.add_argument("--n-sites", type=int, default=64)
    p.add_argument("--coupling", type=float, default=0.0)
    p.add_argument("--field", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--out")
    seeded(p)

    p = add("entropy-curve", cmd_entropy_curve, "exact entropy per spin versus energy")
    p.add_argument("--n-sites", type=int, default=16)
    p.add_argument("--coupling", type=float, default=0.0)
    p.add_argument("--field", type=float, default=1.0)
    p.add_argument("--out")
    p.add_argument("--svg")

    p = add("hysteresis", cmd_hysteresis, "magnetization loop under a field ramp")
    p.add_argument("--n-sites", type=int, default=64)
    p.add_argument("--coupling", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.5)
    p.add_argument("--h-max", type=float, default=2.0)
    p.add_argument("--steps", type=int, default=41)
    p.add_argument("--sweeps-per-step", type=int, default=20)
    p.add_argument("--equilibration", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--svg")
    seeded(p)

    p = add("inversion", cmd_inversion, "field flip and relaxation through negative temperature")
    p.add_argument("--n-sites", type=int, default=200)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--field", type=float, default=1.0)
    p.add_argument("--equilibration", type=int, default=200, help="sweeps at +h before recording")
    p.add_argument("--flip-time", type=int, default=1000)
    p.add_argument("--total-steps", type=int, default=20000)
    p.add_argument("--updates-per-step", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--svg")
    seeded(p)

    p = add("magnetocaloric", cmd_magnetocaloric, "adiabatic demagnetization of the ideal paramagnet")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--field", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--out")

    p = add("partition-zeros", cmd_partition_zeros, "partition function zeros")
    p.add_argument("--kind", choices=("chain", "dhl"), default="chain")
    p.add_argument("--coupling", type=float, default=0.5)
    p.add_argument("--n-sites", type=int, default=64)
    p.add_argument("--generations", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")
    p.add_argument("--svg")

    p = add("julia", cmd_julia, "Julia set of the hierarchical-lattice map")
    p.add_argument("--generations", type=int, default=40)
    p.add_argument("--cap", type=int, default=10_000)
    p.add_argument("--out")
    p.add_argument("--svg")
    seeded(p)

    p = add("fixed-point", cmd_fixed_point, "fixed point and multiplier of the renormalization map")
    p.add_argument("--lo", type=float, default=0.3)
    p.add_argument("--hi", type=float, default=0.8)
    p.add_argument("--out")

    p = add("temperature", cmd_temperature, "signed temperature of a price file")
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=int, default=32)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--trend-window", type=int, default=16)
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--out")

    p = add("renormalize", cmd_renormalize, "temperature stack of a price file")
    p.add_argument("--input", required=True)
    p.add_argument("--partitions", default="day,fixed:5")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--window", type=int, default=32)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--dt-mode", choices=("block_duration", "diffusive"), default="block_duration")
    p.add_argument("--weighting", choices=("volume", "uniform"), default="volume")
    p.add_argument("--open-close-only", action="store_true")
    p.add_argument("--out-dir", required=True)

    p = add("detect", cmd_detect, "coincidence events in an exported temperature stack")
    p.add_argument("--stack-dir", required=True)
    p.add_argument("--tolerance", type=float, default=0.15)
    p.add_argument("--floor", type=float, default=1e-12)
    p.add_argument("--out")

    p = add("gbm", cmd_gbm, "synthetic geometric Brownian ticks")
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--dt", type=float, default=1.0 / 252)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--step-ms", type=int, default=60_000)
    p.add_argument("--out", required=True)
    seeded(p)

    p = add("pipeline", cmd_pipeline, "ingest, renormalize, detect and emit a run directory")
    p.add_argument("--config")
    p.add_argument("--out", help="run directory to create")
    p.add_argument("--force", action="store_true", help="replace an existing run directory")
    p.add_argument("--open-close-only", action="store_true")
    for name, kind in _PIPELINE_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_svg(args)
        return args.func(args)
    except SpinMarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
