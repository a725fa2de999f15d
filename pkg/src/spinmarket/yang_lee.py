"""Partition-function zeros and renormalization-map dynamics.

Two kinds of zeros are kept apart:

* field (Lee-Yang) zeros of an open Ising chain, as roots of the partition
  function in the fugacity ``z = exp(-2 beta h)`` at fixed ``K = beta J``;
* temperature (Fisher) zeros of the diamond hierarchical lattice, as roots in
  ``t = tanh K`` of the partition function of a finite generation.

The diamond lattice renormalizes as ``t -> 2 t^2 / (1 + t^4)``; its
temperature zeros accumulate on the Julia set of that map, which
:func:`julia_inverse_iteration` samples by backward iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .csvio import write_csv, fmt_float
from .errors import BracketError, InvalidParameterError, NumericFailure, PoleError

MAX_CHAIN_SITES = 4096
_EPS = np.finfo(float).eps


@dataclass
class PartitionPolynomial:
    """Partition function as a polynomial, coefficients in ascending powers.

    For ``variable_kind="fugacity"`` the variable is ``z = exp(-2 beta h)``
    and ``Z exp(-beta h n) = exp(log_prefactor) * sum_k c_k z^k``. For
    ``variable_kind="temperature"`` the variable is ``t = tanh K`` and
    ``generations`` records the lattice depth.

    ``evaluator``, when set, maps an array of points to ``(p, p', scale)``
    up to a common positive factor per point, where ``scale`` is
    ``sum |c_k| |z|^k``. The root finder prefers it to Horner's rule on the
    coefficients, which are badly conditioned for long chains.
    """

    coefficients: np.ndarray
    variable_kind: Literal["fugacity", "temperature"]
    coupling_k: float = math.nan
    field_hbeta: float | None = None
    n_sites: int = 0
    generations: int | None = None
    log_prefactor: float = 0.0
    evaluator: Callable | None = field(default=None, repr=False, compare=False)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coefficients)


@dataclass
class ZeroSet:
    zeros: np.ndarray
    residual_bound: float
    iterations: int = 0
    merged_clusters: int = 0

    def to_csv(self, path) -> None:
        write_csv(path, ["re", "im"], [(z.real, z.imag) for z in self.zeros])


def chain_partition_polynomial(coupling_k: float, n_sites: int) -> PartitionPolynomial:
    """Fugacity polynomial of an open Ising chain by transfer-matrix recursion.

    Each new site adds a bond of weight ``exp(K)`` (aligned) or ``exp(-K)``
    (anti-aligned); a down spin multiplies by ``z``. Coefficient ``c_k`` is
    the Boltzmann weight summed over states with k down spins, with the
    field factor ``exp(beta h n)`` divided out. When those weights would
    overflow, they are stored rescaled and ``log_prefactor`` carries the
    factor (long chains at strong coupling); otherwise ``log_prefactor`` is 0.
    """
    if int(n_sites) != n_sites or not (1 <= n_sites <= MAX_CHAIN_SITES):
        raise InvalidParameterError(f"n_sites must be in [1, {MAX_CHAIN_SITES}], got {n_sites!r}")
    if not math.isfinite(coupling_k):
        raise InvalidParameterError("K must be finite")
    n = int(n_sites)
    flip = math.exp(-2.0 * coupling_k)
    up = np.zeros(n + 1)
    down = np.zeros(n + 1)
    up[0] = 1.0
    down[1] = 1.0
    log_scale = 0.0
    for _ in range(n - 1):
        new_up = up + flip * down
        new_down = np.zeros(n + 1)
        new_down[1:] = (flip * up + down)[:-1]
        up, down = new_up, new_down
        top = max(up.max(), down.max())
        if top > 1e100:
            up /= top
            down /= top
            log_scale += math.log(top)
    coeffs = up + down
    log_prefactor = log_scale + coupling_k * (n - 1)
    if log_prefactor + math.log(coeffs.max()) < 700:
        coeffs = coeffs * math.exp(log_prefactor)
        log_prefactor = 0.0
    return PartitionPolynomial(
        coeffs,
        "fugacity",
        float(coupling_k),
        None,
        n,
        log_prefactor=log_prefactor,
        evaluator=_chain_evaluator(flip, n),
    )


def _chain_evaluator(flip: float, n: int) -> Callable:
    """Evaluate the chain polynomial and its derivative by the transfer recursion.

    Every step is renormalized by the positive-weight value at |z| so nothing
    overflows; the same factor multiplies p, p' and scale.
    """

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        az = np.abs(z)
        up = np.ones_like(z)
        down = z.copy()
        d_up = np.zeros_like(z)
        d_down = np.ones_like(z)
        a_up = np.ones_like(az)
        a_down = az.copy()
        for _ in range(n - 1):
            mix = flip * up + down
            new_up = up + flip * down
            new_down = z * mix
            new_d_up = d_up + flip * d_down
            new_d_down = mix + z * (flip * d_up + d_down)
            new_a_up = a_up + flip * a_down
            new_a_down = az * (flip * a_up + a_down)
            norm = new_a_up + new_a_down
            up, down = new_up / norm, new_down / norm
            d_up, d_down = new_d_up / norm, new_d_down / norm
            a_up, a_down = new_a_up / norm, new_a_down / norm
        return up + down, d_up + d_down, a_up + a_down

    return evaluate


def _int_polymul(x: list[int], y: list[int]) -> list[int]:
    out = [0] * (len(x) + len(y) - 1)
    for i, a in enumerate(x):
        if a:
            for j, b in enumerate(y):
                out[i + j] += a * b
    return out


def _int_polyadd(x: list[int], y: list[int]) -> list[int]:
    n = max(len(x), len(y))
    return [(x[i] if i < len(x) else 0) + (y[i] if i < len(y) else 0) for i in range(n)]


def dhl_partition_polynomial(generations: int) -> PartitionPolynomial:
    """Temperature polynomial of the diamond hierarchical lattice.

    A bond with end spins equal (``a``) or opposite (``b``) has weights
    proportional to ``1 + t`` and ``1 - t``. One generation replaces each bond
    by two parallel pairs of bonds in series:
    ``a' = (a^2 + b^2)^2``, ``b' = (2ab)^2``. Summing the two root spins gives
    ``Z ∝ a + b``, whose zeros are the points sent to the poles of the map
    after ``generations - 1`` steps.
    """
    # at 5 generations the coefficients span more than the double range
    if generations < 1 or generations > 4:
        raise InvalidParameterError("generations must be in [1, 4]")
    a, b = [1, 1], [1, -1]
    for _ in range(generations):
        s = _int_polyadd(_int_polymul(a, a), _int_polymul(b, b))
        ab = _int_polymul(a, b)
        a, b = _int_polymul(s, s), [4 * c for c in _int_polymul(ab, ab)]
    exact = _int_polyadd(a, b)
    scale = max(abs(c) for c in exact)
    coeffs = np.array([c / scale for c in exact])
    return PartitionPolynomial(coeffs, "temperature", n_sites=4**generations, generations=generations)


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------


def _horner(coeffs_desc: np.ndarray, z: np.ndarray):
    """p(z), p'(z) and sum |c_i| |z|^i for coefficients in descending order."""
    p = np.full(z.shape, coeffs_desc[0], dtype=complex)
    dp = np.zeros(z.shape, dtype=complex)
    scale = np.full(z.shape, abs(coeffs_desc[0]))
    az = np.abs(z)
    for c in coeffs_desc[1:]:
        dp = dp * z + p
        p = p * z + c
        scale = scale * az + abs(c)
    return p, dp, scale


def _taylor(coeffs_asc: np.ndarray, c: complex) -> np.ndarray:
    """Coefficients b_j of p(c + w) = sum b_j w^j."""
    work = np.array(coeffs_asc[::-1], dtype=complex)
    n = len(work) - 1
    out = np.empty(n + 1, dtype=complex)
    for j in range(n + 1):
        for i in range(1, len(work) - j):
            work[i] += c * work[i - 1]
        out[j] = work[len(work) - 1 - j]
    return out


def _initial_guesses(coeffs_asc: np.ndarray) -> np.ndarray:
    n = len(coeffs_asc) - 1
    with np.errstate(divide="ignore", over="ignore"):
        radius = (np.max(np.abs(coeffs_asc)) / abs(coeffs_asc[-1])) ** (1.0 / n)
    if not (np.isfinite(radius) and radius > 0):
        radius = 1.0
    # offset keeps the start set off the real axis and non-symmetric
    angles = 2 * np.pi * np.arange(n) / n + 0.4 / n + 0.25
    return radius * np.exp(1j * angles)


def _aberth(
    evaluate: Callable, z: np.ndarray, max_iter: int, backward_freeze: bool
) -> tuple[np.ndarray, int]:
    """Simultaneous Aberth-Ehrlich iteration.

    A root stops moving once its correction is at rounding level, or, with
    ``backward_freeze``, once its residual is within rounding of the
    coefficient scale.
    """
    n = len(z)
    active = np.ones(n, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        p, dp, scale = evaluate(z)
        if backward_freeze:
            active &= ~(np.abs(p) <= 4 * n * _EPS * scale)
        active &= p != 0
        if not active.any():
            break
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            corr = ratio / (1.0 - ratio * inv.sum(axis=1))
        corr[~np.isfinite(corr)] = 0.0
        corr[~active] = 0.0
        z = z - corr
        active &= ~(np.abs(corr) <= 2 * _EPS * np.abs(z))
        if not active.any():
            break
    return z, it


def _horner_evaluator(coeffs_asc: np.ndarray) -> Callable:
    desc = coeffs_asc[::-1].astype(complex)
    return lambda z: _horner(desc, z)


def _relative_residuals(evaluate: Callable, z: np.ndarray) -> np.ndarray:
    p, _, scale = evaluate(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(p) / scale
    r[scale == 0] = 0.0
    return r


def _merge_clusters(coeffs_asc: np.ndarray, z: np.ndarray, tol: float) -> tuple[np.ndarray, int]:
    """Collapse clusters around a multiple root into copies of their centroid.

    Roots are linked when their Newton inclusion discs (radius
    ``n |p/p'|``) overlap. A linked group of size m is accepted as an m-fold
    root if the Taylor coefficients of order < m at the centroid are all
    below ``tol`` relative to the order-m coefficient.
    """
    n = len(z)
    desc = coeffs_asc[::-1].astype(complex)
    p, dp, _ = _horner(desc, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        radii = n * np.abs(p / dp)
    radii[~np.isfinite(radii)] = np.inf
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(z[i] - z[j]) <= radii[i] + radii[j]:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    z = z.copy()
    merged = 0
    for members in groups.values():
        m = len(members)
        if m < 2:
            continue
        c = z[members].mean()
        b = np.abs(_taylor(coeffs_asc, c))
        if b[m] == 0:
            continue
        if np.max(b[:m] / b[m]) <= tol:
            z[members] = c
            merged += 1
    return z, merged


def _symmetrize(z: np.ndarray) -> np.ndarray:
    """Enforce exact conjugate pairing for a real-coefficient polynomial.

    Greedy matching on |z_i - conj(z_j)|; a root matched with itself is
    made real, a matched pair is replaced by the average and its conjugate.
    """
    n = len(z)
    cost = np.abs(z[:, None] - np.conj(z)[None, :])
    iu, ju = np.triu_indices(n)
    order = np.argsort(cost[iu, ju], kind="stable")
    matched = np.zeros(n, dtype=bool)
    out = z.copy()
    for k in order:
        i, j = iu[k], ju[k]
        if matched[i] or matched[j]:
            continue
        matched[i] = matched[j] = True
        if i == j:
            out[i] = complex(z[i].real, 0.0)
        else:
            avg = 0.5 * (z[i] + np.conj(z[j]))
            out[i], out[j] = avg, np.conj(avg)
    return out


def canonical_sort(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    order = np.lexsort((z.imag, z.real))
    return z[order]


def find_zeros(
    poly: PartitionPolynomial | np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> ZeroSet:
    """All complex roots of a real polynomial by Aberth-Ehrlich iteration.

    ``residual_bound`` is the largest relative residual
    ``|p(z)| / sum |c_i| |z|^i`` over the returned roots. Polynomials that
    carry a structured evaluator are iterated with it; others use Horner's
    rule and a cluster pass that snaps numerically multiple roots to their
    centroid.
    """
    structured = isinstance(poly, PartitionPolynomial) and poly.evaluator is not None
    coeffs = np.asarray(poly.coefficients if isinstance(poly, PartitionPolynomial) else poly, dtype=float)
    coeffs = np.trim_zeros(coeffs, "b")
    if len(coeffs) < 2:
        raise InvalidParameterError("polynomial degree must be at least 1")
    n_zero = 0
    if not structured:
        while coeffs[0] == 0:
            coeffs = coeffs[1:]
            n_zero += 1
    evaluate = poly.evaluator if structured else _horner_evaluator(coeffs)
    roots = np.zeros(0, dtype=complex)
    iterations = merged = 0
    if len(coeffs) > 1:
        roots, iterations = _aberth(evaluate, _initial_guesses(coeffs), max_iter, not structured)
        if not structured:
            roots, merged = _merge_clusters(coeffs, roots, tol)
        roots = _symmetrize(roots)
    residuals = _relative_residuals(evaluate, roots) if len(roots) else np.zeros(0)
    bound = float(residuals.max()) if len(residuals) else 0.0
    if not np.all(np.isfinite(roots)) or bound > tol:
        raise NumericFailure(f"root finder did not reach tolerance {tol:g} in {max_iter} iterations", bound)
    roots = np.concatenate([np.zeros(n_zero, dtype=complex), roots])
    return ZeroSet(canonical_sort(roots), bound, iterations, merged)


def distance_to_positive_axis(z) -> np.ndarray:
    """Euclidean distance from each z to the ray [0, inf) on the real axis."""
    z = np.asarray(z, dtype=complex)
    return np.where(z.real >= 0, np.abs(z.imag), np.abs(z))


# ---------------------------------------------------------------------------
# Diamond hierarchical lattice renormalization map
# ---------------------------------------------------------------------------


def dhl_renorm_apply(t):
    """One renormalization step t -> 2 t^2 / (1 + t^4), t = tanh K."""
    t4 = t**4
    denom = 1 + t4
    if np.any(np.abs(denom) <= 1e-15 * np.maximum(1.0, np.abs(t4))):
        raise PoleError(f"pole of the renormalization map at t={t}")
    return 2 * t * t / denom


def dhl_renorm_derivative(t):
    return 4 * t * (1 - t**4) / (1 + t**4) ** 2


def dhl_preimages(w: complex) -> np.ndarray:
    """The four solutions t of R(t) = w, with multiplicity.

    With u = t^2 the equation is ``w u^2 - 2u + w = 0``, whose roots multiply
    to 1. The larger root is taken from the cancellation-free branch and the
    other as its reciprocal. ``w = 0`` has the double root t = 0 (the other
    two preimages are at infinity) and returns two entries.
    """
    w = complex(w)
    if w == 0:
        return np.array([0j, 0j])
    s = np.sqrt(1 - w * w + 0j)
    big = (1 + s) / w if abs(1 + s) >= abs(1 - s) else (1 - s) / w
    small = 1 / big
    r1, r2 = np.sqrt(big), np.sqrt(small)
    return np.array([r1, -r1, r2, -r2])


@dataclass
class RenormMap:
    """A one-variable renormalization transformation and its fixed points."""

    map_id: str
    apply: Callable
    derivative: Callable
    fixed_points: list[tuple[float, float]] = field(default_factory=list)

    @classmethod
    def dhl_ising(cls) -> "RenormMap":
        rmap = cls("dhl_ising", dhl_renorm_apply, dhl_renorm_derivative)
        rmap.fixed_points = [
            find_fixed_point(rmap, (-0.1, 0.1)),
            find_fixed_point(rmap, (0.3, 0.8)),
            (1.0, abs(dhl_renorm_derivative(1.0))),
        ]
        return rmap

    @property
    def critical(self) -> tuple[float, float]:
        """The repelling nontrivial fixed point (t_c, multiplier)."""
        for t, mult in self.fixed_points:
            if 0 < t < 1:
                return t, mult
        raise ValueError("no nontrivial fixed point stored")


def find_fixed_point(
    rmap: RenormMap, bracket: tuple[float, float], xtol: float = 1e-15, max_iter: int = 200
) -> tuple[float, float]:
    """Fixed point of ``rmap`` inside ``bracket`` and its multiplier |R'(t*)|.

    Safeguarded Newton on g(t) = R(t) - t: Newton steps that leave the
    current bracket fall back to bisection.
    """
    lo, hi = map(float, bracket)
    if lo > hi:
        lo, hi = hi, lo

    def g(t):
        return rmap.apply(t) - t

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0:
        return lo, abs(rmap.derivative(lo))
    if g_hi == 0:
        return hi, abs(rmap.derivative(hi))
    if np.sign(g_lo) == np.sign(g_hi):
        raise BracketError(f"R(t) - t does not change sign on [{lo}, {hi}]")
    t = 0.5 * (lo + hi)
    for _ in range(max_iter):
        gt = g(t)
        if gt == 0:
            break
        if np.sign(gt) == np.sign(g_lo):
            lo, g_lo = t, gt
        else:
            hi = t
        slope = rmap.derivative(t) - 1
        step_ok = slope != 0
        if step_ok:
            cand = t - gt / slope
            step_ok = lo < cand < hi
        new = cand if step_ok else 0.5 * (lo + hi)
        if abs(new - t) <= xtol * max(1.0, abs(t)):
            t = new
            break
        t = new
    return t, abs(rmap.derivative(t))


def central_difference(f: Callable, t: float, step: float = 1e-5) -> float:
    return (f(t + step) - f(t - step)) / (2 * step)


def fixed_point_report(t_star: float, multiplier: float) -> str:
    return f"t_star={fmt_float(t_star)}\nmultiplier={fmt_float(multiplier)}\n"


# ---------------------------------------------------------------------------
# Julia set by inverse iteration
# ---------------------------------------------------------------------------


@dataclass
class JuliaCloud:
    """Points of backward orbits; ``parents[i]`` indexes the point that p_i maps onto."""

    points: np.ndarray
    parents: np.ndarray
    generation_of: np.ndarray
    generations: int
    skipped: int = 0

    def residuals(self, rmap_apply: Callable = dhl_renorm_apply) -> np.ndarray:
        idx = np.nonzero(self.parents >= 0)[0]
        p = self.points[idx]
        return np.abs(rmap_apply(p) - self.points[self.parents[idx]])

    def to_csv(self, path) -> None:
        pts = canonical_sort(self.points)
        write_csv(path, ["re", "im"], [(z.real, z.imag) for z in pts])


def julia_inverse_iteration(
    rmap: RenormMap,
    seed_point: complex | None = None,
    generations: int = 30,
    cap: int = 10_000,
    rng_seed: int = 0,
    residual_tol: float = 1e-10,
) -> JuliaCloud:
    """Sample the Julia set of the map by repeated backward iteration.

    Starting from ``seed_point`` (default: the repelling fixed point), each
    generation takes all preimages of the current frontier and keeps a
    random subset of them. The subset size spreads the points still missing
    evenly over the generations still to come, so the cloud reaches deep
    generations and ends with exactly ``cap`` points when enough preimages
    exist. A preimage is dropped and counted in ``skipped`` if it is not
    finite, lies on the pole set, or misses its parent by more than
    ``residual_tol`` after one Newton polish.
    """
    if rmap.map_id != "dhl_ising":
        raise InvalidParameterError(f"unsupported map {rmap.map_id!r}")
    if generations < 0 or cap < 1:
        raise InvalidParameterError("generations must be >= 0 and cap >= 1")
    if seed_point is None:
        seed_point = rmap.critical[0]
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    points = [complex(seed_point)]
    parents = [-1]
    gens = [0]
    frontier = [0]
    skipped = 0
    for g in range(1, generations + 1):
        if len(points) >= cap or not frontier:
            break
        cands: list[tuple[complex, int]] = []
        for idx in frontier:
            w = points[idx]
            for t in dhl_preimages(w):
                t = complex(t)
                if not (math.isfinite(t.real) and math.isfinite(t.imag)):
                    skipped += 1
                    continue
                d = 1 + t**4
                if abs(d) <= 1e-12:
                    skipped += 1
                    continue
                r = 2 * t * t / d - w
                dr = 4 * t * (1 - t**4) / d**2
                if dr != 0:
                    t_new = t - r / dr
                    d_new = 1 + t_new**4
                    if abs(d_new) > 1e-12 and abs(2 * t_new * t_new / d_new - w) <= abs(r):
                        t = t_new
                if abs(dhl_renorm_apply(t) - w) > residual_tol:
                    skipped += 1
                    continue
                cands.append((t, idx))
        width = math.ceil((cap - len(points)) / (generations - g + 1))
        keep = min(width, len(cands))
        if keep < len(cands):
            chosen = np.sort(rng.choice(len(cands), size=keep, replace=False))
            cands = [cands[i] for i in chosen]
        frontier = []
        for t, idx in cands:
            frontier.append(len(points))
            points.append(t)
            parents.append(idx)
            gens.append(g)
    return JuliaCloud(
        np.array(points, dtype=complex),
        np.array(parents, dtype=int),
        np.array(gens, dtype=int),
        generations,
        skipped,
    )
