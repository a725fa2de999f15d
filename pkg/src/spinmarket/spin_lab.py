"""Spin-1/2 laboratory on a one-dimensional ring.

Energy of a configuration ``s`` (each ``s_i = ±1``) is

    E = -J * sum_i s_i s_{(i+1) mod n} - h * sum_i s_i

so a two-site ring counts its single bond twice and a one-site ring has a
constant coupling term. Dynamics are single-site Metropolis updates at inverse
temperature ``beta``, which may be negative (population inversion).

Random numbers come from a PCG64 generator seeded with ``rng_seed``. Updates
are consumed in chunks of whole sweeps (at most ``_CHUNK_UPDATES`` updates per
chunk): for each chunk the generator first yields all site indices, then all
acceptance uniforms. One uniform is drawn per update whether or not it is
needed, so the stream position depends only on the number of updates.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .csvio import write_csv
from .errors import DegenerateStateError, InvalidParameterError, ResourceLimitError

MAX_ENUM_SITES = 24
_CHUNK_UPDATES = 1 << 16


@njit(cache=True)
def _metropolis_kernel(spins, sites, draws, beta, coupling_j, field_h, record_every):
    n = spins.shape[0]
    n_updates = sites.shape[0]
    n_records = n_updates // record_every if record_every > 0 else 0
    mags = np.empty(n_records)
    total = 0
    for i in range(n):
        total += spins[i]
    r = 0
    for k in range(n_updates):
        i = sites[k]
        s = spins[i]
        if n == 1:
            nb = 0
        else:
            nb = spins[(i - 1) % n] + spins[(i + 1) % n]
        d_e = 2.0 * s * (coupling_j * nb + field_h)
        x = -beta * d_e
        if x >= 0.0 or draws[k] < math.exp(x):
            spins[i] = -s
            total -= 2 * s
        if record_every > 0 and (k + 1) % record_every == 0:
            mags[r] = total / n
            r += 1
    return mags


@dataclass
class SpinSystem:
    """N spin-1/2 sites on a ring with coupling ``coupling_j`` and field ``field_h``.

    ``spins`` defaults to all +1. The generator in ``rng`` is created from
    ``rng_seed`` and advances as the system is updated.
    """

    n_sites: int
    coupling_j: float = 0.0
    field_h: float = 0.0
    beta: float = 1.0
    spins: np.ndarray | None = None
    rng_seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise InvalidParameterError(f"n_sites must be a positive integer, got {self.n_sites!r}")
        self.n_sites = int(self.n_sites)
        for name in ("coupling_j", "field_h", "beta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value}")
            setattr(self, name, value)
        if self.spins is None:
            self.spins = np.ones(self.n_sites, dtype=np.int64)
        else:
            spins = np.asarray(self.spins)
            if spins.shape != (self.n_sites,) or not np.all(np.abs(spins) == 1):
                raise InvalidParameterError("spins must be a length-n_sites vector of ±1")
            self.spins = spins.astype(np.int64)
        self.rng = np.random.Generator(np.random.PCG64(self.rng_seed))

    @classmethod
    def random_start(cls, n_sites: int, rng_seed: int = 0, **kwargs) -> "SpinSystem":
        """Start from a random configuration drawn from the system's own generator."""
        system = cls(n_sites, rng_seed=rng_seed, **kwargs)
        system.spins = system.rng.choice(np.array([-1, 1], dtype=np.int64), size=n_sites)
        return system

    @property
    def magnetization(self) -> float:
        return float(self.spins.sum()) / self.n_sites

    @property
    def energy_per_spin(self) -> float:
        s = self.spins
        if self.n_sites == 1:
            bonds = 1.0
        else:
            bonds = float(np.sum(s * np.roll(s, -1)))
        return (-self.coupling_j * bonds - self.field_h * float(s.sum())) / self.n_sites

    def copy(self) -> "SpinSystem":
        return copy.deepcopy(self)

    def with_params(self, **changes) -> "SpinSystem":
        """Copy with some of J, h, beta replaced; spins and generator state carried over."""
        new = self.copy()
        for name, value in changes.items():
            if name not in ("coupling_j", "field_h", "beta"):
                raise InvalidParameterError(f"cannot change {name}")
            value = float(value)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value}")
            setattr(new, name, value)
        return new


def _run_updates(system: SpinSystem, n_updates: int, record_every: int = 0) -> np.ndarray:
    """Apply ``n_updates`` Metropolis updates in place; optionally record m every ``record_every`` updates."""
    n = system.n_sites
    chunk = max(n, (_CHUNK_UPDATES // n) * n)
    if record_every > 0:
        chunk = max(record_every, (chunk // record_every) * record_every)
    out = []
    done = 0
    while done < n_updates:
        size = min(chunk, n_updates - done)
        sites = system.rng.integers(0, n, size=size)
        draws = system.rng.random(size)
        out.append(
            _metropolis_kernel(
                system.spins, sites, draws, system.beta, system.coupling_j, system.field_h, record_every
            )
        )
        done += size
    if not out:
        return np.empty(0)
    return np.concatenate(out)


def metropolis_sweep(system: SpinSystem, n_sweeps: int) -> SpinSystem:
    """Return a copy of ``system`` after ``n_sweeps`` sweeps of n_sites single-site updates.

    The input is left untouched; the returned system's generator continues
    the same stream, so chaining calls is reproducible.
    """
    if n_sweeps < 0:
        raise InvalidParameterError("n_sweeps must be non-negative")
    for name in ("coupling_j", "field_h", "beta"):
        if not math.isfinite(getattr(system, name)):
            raise InvalidParameterError(f"{name} must be finite")
    out = system.copy()
    _run_updates(out, n_sweeps * out.n_sites)
    return out


def sweep_magnetizations(system: SpinSystem, n_sweeps: int) -> np.ndarray:
    """Advance ``system`` in place by ``n_sweeps`` sweeps; return m after each sweep."""
    return _run_updates(system, n_sweeps * system.n_sites, record_every=system.n_sites)


def batch_mean_stderr(x, n_batches: int = 20) -> tuple[float, float]:
    """Mean and batch-means standard error of a correlated time series."""
    x = np.asarray(x, dtype=float)
    if x.size < 2 * n_batches:
        n_batches = max(2, x.size // 2)
    size = x.size // n_batches
    if size < 1:
        return float(x.mean()), float("inf")
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(n_batches))


def sample_magnetization(
    system: SpinSystem, n_sweeps: int, burn_in: int = 100, n_batches: int = 20
) -> tuple[float, float]:
    """Time-averaged magnetization and its batch-means standard error."""
    work = metropolis_sweep(system, burn_in)
    mags = sweep_magnetizations(work, n_sweeps)
    return batch_mean_stderr(mags, n_batches)


# ---------------------------------------------------------------------------
# Exact density of states
# ---------------------------------------------------------------------------


@dataclass
class EntropyCurve:
    """Entropy per spin ``ln g(E) / n`` at each attainable energy per spin."""

    points: list[tuple[float, float]]
    coupling_j: float
    n_sites: int
    field_h: float = 0.0

    @property
    def energies(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def entropies(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def to_csv(self, path) -> None:
        write_csv(path, ["energy_per_spin", "entropy_per_spin"], self.points)


def ring_state_counts(n_sites: int) -> np.ndarray:
    """Number of ring configurations with ``k`` up spins and ``w`` unsatisfied bonds.

    Returns an integer array ``counts[k, w]`` of shape (n+1, n+1). Built by a
    transfer recursion over sites that remembers the first spin so the closing
    bond can be scored.
    """
    n = n_sites
    # table[first, current, k, w]
    table = np.zeros((2, 2, n + 1, n + 1), dtype=np.int64)
    table[1, 1, 1, 0] = 1
    table[0, 0, 0, 0] = 1
    for _ in range(n - 1):
        nxt = np.zeros_like(table)
        for cur in (0, 1):
            for new in (0, 1):
                dk = new
                dw = int(cur != new)
                src = table[:, cur, : n + 1 - dk, : n + 1 - dw]
                nxt[:, new, dk:, dw:] += src
        table = nxt
    counts = np.zeros((n + 1, n + 1), dtype=np.int64)
    for first in (0, 1):
        for last in (0, 1):
            if n == 1:
                dw = 0
            else:
                dw = int(first != last)
            counts[:, dw:] += table[first, last, :, : n + 1 - dw]
    return counts


def entropy_curve(coupling_j: float, field_h: float, n_sites: int) -> EntropyCurve:
    """Exact microcanonical entropy per spin versus energy per spin.

    Energies that coincide (to 12 decimals) are merged and their
    degeneracies summed.
    """
    if n_sites < 1:
        raise InvalidParameterError("n_sites must be positive")
    if n_sites > MAX_ENUM_SITES:
        raise ResourceLimitError(f"exact enumeration limited to {MAX_ENUM_SITES} sites, got {n_sites}")
    n = n_sites
    counts = ring_state_counts(n)
    levels: dict[float, int] = {}
    for k in range(n + 1):
        for w in range(n + 1):
            g = int(counts[k, w])
            if g == 0:
                continue
            bonds = n - 2 * w if n > 1 else 1
            e = (-coupling_j * bonds - field_h * (2 * k - n)) / n
            key = round(e, 12) + 0.0
            levels[key] = levels.get(key, 0) + g
    points = [(e, math.log(g) / n) for e, g in sorted(levels.items())]
    return EntropyCurve(points=points, coupling_j=float(coupling_j), n_sites=n, field_h=float(field_h))


def binomial_entropy(n_sites: int, magnetization: float) -> float:
    """Exact paramagnet entropy per spin, ln C(n, n(1+m)/2) / n."""
    k = round(n_sites * (1 + magnetization) / 2)
    return math.log(math.comb(n_sites, k)) / n_sites


def paramagnet_entropy_limit(magnetization: float) -> float:
    """Large-n paramagnet entropy per spin, ln2 - [(1+m)ln(1+m) + (1-m)ln(1-m)]/2."""
    m = magnetization

    def xlogx(x):
        return 0.0 if x == 0 else x * math.log(x)

    return math.log(2) - 0.5 * (xlogx(1 + m) + xlogx(1 - m))


def max_entropy_deviation(a: EntropyCurve, b: EntropyCurve) -> float:
    """Largest |S_b(E) - S_a(E)| over a's energies inside b's range (b linearly interpolated)."""
    ea, sa = a.energies, a.entropies
    eb, sb = b.energies, b.entropies
    inside = (ea >= eb.min()) & (ea <= eb.max())
    if not inside.any():
        return float("nan")
    return float(np.max(np.abs(np.interp(ea[inside], eb, sb) - sa[inside])))


# ---------------------------------------------------------------------------
# Hysteresis
# ---------------------------------------------------------------------------


@dataclass
class HysteresisLoop:
    """Mean magnetization along a closed field ramp.

    ``branch_down`` runs from +h_max to -h_max and ``branch_up`` from -h_max to
    +h_max, both as (field_h, mean_magnetization) pairs. ``loop_area`` is the
    area enclosed by the loop, the integral of (m_down - m_up) dh over
    increasing h (equivalently the closed-path integral of m dh traversed
    with the enclosed region on the left). For a lagging magnet this is the
    energy dissipated per cycle and is non-negative.
    """

    branch_up: list[tuple[float, float]]
    branch_down: list[tuple[float, float]]
    loop_area: float
    area_stderr: float = 0.0

    def to_csv(self, path) -> None:
        rows = [("down", h, m) for h, m in self.branch_down] + [("up", h, m) for h, m in self.branch_up]
        write_csv(path, ["branch", "field_h", "magnetization"], rows)


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return w


def hysteresis_loop(
    system: SpinSystem,
    h_max: float,
    n_field_steps: int,
    sweeps_per_step: int,
    equilibration_sweeps: int = 0,
    start: str = "down",
) -> HysteresisLoop:
    """Ramp the field around a closed loop and record mean magnetization.

    At each of the ``n_field_steps`` field values per branch the chain first
    runs ``equilibration_sweeps`` unrecorded sweeps and then averages m over
    ``sweeps_per_step`` sweeps. Before the first branch the system is
    relaxed for ``sweeps_per_step`` sweeps at the starting field.
    ``start="up"`` traverses the loop the other way round (-h_max first).
    """
    if sweeps_per_step <= 0:
        raise InvalidParameterError("sweeps_per_step must be positive")
    if n_field_steps < 2:
        raise InvalidParameterError("n_field_steps must be at least 2")
    if not (math.isfinite(h_max) and h_max >= 0):
        raise InvalidParameterError("h_max must be finite and non-negative")
    if start not in ("down", "up"):
        raise InvalidParameterError("start must be 'down' or 'up'")

    descending = np.linspace(h_max, -h_max, n_field_steps)
    ascending = descending[::-1].copy()
    order = [("down", descending), ("up", ascending)]
    if start == "up":
        order.reverse()

    work = system.with_params(field_h=order[0][1][0])
    _run_updates(work, sweeps_per_step * work.n_sites)

    results = {}
    for key, fields in order:
        means, errs = [], []
        for h in fields:
            work.field_h = float(h)
            if equilibration_sweeps:
                _run_updates(work, equilibration_sweeps * work.n_sites)
            mags = sweep_magnetizations(work, sweeps_per_step)
            means.append(float(mags.mean()))
            errs.append(float(mags.std(ddof=1) / math.sqrt(mags.size)) if mags.size > 1 else 0.0)
        results[key] = (np.array(means), np.array(errs))

    m_down, e_down = results["down"]
    m_up, e_up = results["up"]
    # down branch reversed so both are indexed by ascending h
    m_down_asc, e_down_asc = m_down[::-1], e_down[::-1]
    w = _trapezoid_weights(ascending)
    area = float(np.sum(w * (m_down_asc - m_up)))
    area_err = float(math.sqrt(np.sum(w**2 * (e_down_asc**2 + e_up**2))))
    return HysteresisLoop(
        branch_up=[(float(h), float(m)) for h, m in zip(ascending, m_up)],
        branch_down=[(float(h), float(m)) for h, m in zip(descending, m_down)],
        loop_area=area,
        area_stderr=area_err,
    )


# ---------------------------------------------------------------------------
# Scenario traces
# ---------------------------------------------------------------------------


@dataclass
class ScenarioStep:
    time_step: int
    magnetization: float
    field_h: float
    beta_effective: float

    @property
    def temperature_effective(self) -> float:
        """1/beta, with the infinity marker (m = 0, h != 0) mapped to an infinite temperature."""
        if self.field_h != 0 and math.isinf(self.beta_effective):
            return self.beta_effective
        if self.field_h == 0:
            return 0.0
        return 1.0 / self.beta_effective


@dataclass
class ScenarioTrace:
    """Time series of magnetization, field and effective inverse temperature.

    ``beta_effective`` is atanh(m)/h. Where m = 0 with h != 0 the inverse
    temperature passes through zero and the temperature is infinite; such
    steps carry ``±inf`` as an infinity marker instead of 0.0, signed like
    the preceding step's beta (T heads to -inf from the inverted side). A
    step with h = 0 (end of a demagnetization ramp) holds beta = ±inf
    because the temperature there is zero, not infinite.
    """

    steps: list[ScenarioStep]

    @property
    def magnetizations(self) -> np.ndarray:
        return np.array([s.magnetization for s in self.steps])

    @property
    def fields(self) -> np.ndarray:
        return np.array([s.field_h for s in self.steps])

    @property
    def betas(self) -> np.ndarray:
        return np.array([s.beta_effective for s in self.steps])

    @property
    def temperatures(self) -> np.ndarray:
        return np.array([s.temperature_effective for s in self.steps])

    def marker_steps(self) -> list[int]:
        return [s.time_step for s in self.steps if s.field_h != 0 and math.isinf(s.beta_effective)]

    def to_csv(self, path) -> None:
        write_csv(
            path,
            ["step", "magnetization", "field_h", "beta_eff"],
            [(s.time_step, s.magnetization, s.field_h, s.beta_effective) for s in self.steps],
        )


def effective_beta(magnetization: float, field_h: float, previous: float | None = None, n_sites: int | None = None) -> float:
    """Two-level inverse temperature atanh(m)/h.

    A saturated finite sample (|m| = 1) is read as one spin short of
    saturation so that infinities are reserved for the markers described
    on :class:`ScenarioTrace`.
    """
    m = float(magnetization)
    if field_h == 0:
        if m == 0:
            return math.nan
        return math.copysign(math.inf, m)
    if m == 0:
        sign = -1.0 if (previous is not None and previous < 0) else 1.0
        return sign * math.inf
    if abs(m) >= 1:
        if n_sites is None or n_sites < 2:
            return math.copysign(math.inf, m) * math.copysign(1.0, field_h)
        m = math.copysign(1 - 1 / n_sites, m)
    return math.atanh(m) / field_h


def population_inversion_run(
    system: SpinSystem,
    flip_time: int,
    total_steps: int,
    updates_per_step: int | None = None,
) -> ScenarioTrace:
    """Run at the current field, negate it abruptly at ``flip_time`` and relax.

    One time step is ``updates_per_step`` single-site updates (default one
    sweep); magnetization is recorded at the end of each step, except that
    the flip step records the pre-relaxation state right after the field is
    inverted.
    """
    if flip_time >= total_steps:
        raise InvalidParameterError("flip_time must be smaller than total_steps")
    if flip_time < 0:
        raise InvalidParameterError("flip_time must be non-negative")
    if system.field_h == 0:
        raise InvalidParameterError("population inversion needs a non-zero field")
    per_step = system.n_sites if updates_per_step is None else int(updates_per_step)
    if per_step < 1:
        raise InvalidParameterError("updates_per_step must be positive")

    work = system.copy()
    h0 = work.field_h
    before = _run_updates(work, flip_time * per_step, record_every=per_step)
    work.field_h = -h0
    at_flip = np.array([work.magnetization])
    after = _run_updates(work, (total_steps - flip_time - 1) * per_step, record_every=per_step)
    mags = np.concatenate([before, at_flip, after])

    steps: list[ScenarioStep] = []
    previous = None
    for t, m in enumerate(mags.tolist()):
        h = h0 if t < flip_time else -h0
        beta = effective_beta(m, h, previous, work.n_sites)
        steps.append(ScenarioStep(t, m, h, beta))
        previous = beta
    return ScenarioTrace(steps)


def relaxed_beta(trace: ScenarioTrace, tail: int, n_batches: int = 10) -> tuple[float, float]:
    """Inverse temperature from the time-averaged magnetization over the last ``tail`` steps.

    Returns (beta, stderr) with the error propagated through atanh by the
    delta method.
    """
    tail_steps = trace.steps[-tail:]
    h = tail_steps[-1].field_h
    if any(s.field_h != h for s in tail_steps):
        raise InvalidParameterError("field changes inside the tail window")
    mean, err = batch_mean_stderr([s.magnetization for s in tail_steps], n_batches)
    beta = math.atanh(mean) / h
    return beta, err / ((1 - mean**2) * abs(h))


def magnetocaloric_run(initial_beta: float, initial_h: float, n_ramp_steps: int) -> ScenarioTrace:
    """Quasi-static adiabatic demagnetization of an ideal paramagnet.

    Entropy of the ideal paramagnet depends on m alone, so adiabatic
    means constant m = tanh(beta0 * h0) while the field ramps linearly to 0
    in ``n_ramp_steps`` steps. The effective temperature h/atanh(m) falls in
    proportion to the field.
    """
    if not (math.isfinite(initial_beta) and math.isfinite(initial_h)):
        raise InvalidParameterError("initial_beta and initial_h must be finite")
    if n_ramp_steps < 1:
        raise InvalidParameterError("n_ramp_steps must be positive")
    if initial_beta <= 0 or initial_h <= 0:
        raise InvalidParameterError("initial_beta and initial_h must be positive")
    m = math.tanh(initial_beta * initial_h)
    if m == 0:
        raise DegenerateStateError("initial magnetization is zero; T_eff undefined under constant m")
    steps = []
    for k in range(n_ramp_steps + 1):
        h = initial_h * (n_ramp_steps - k) / n_ramp_steps
        steps.append(ScenarioStep(k, m, h, effective_beta(m, h)))
    return ScenarioTrace(steps)
