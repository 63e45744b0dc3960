"""Scalar numerics: bracketed root finding, 1-D maximization, certified series
sums and the Gaussian tail function.

Everything here is deterministic. Callers pass plain callables; no state is
kept between calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np
from scipy import optimize, special

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200
LOG_GRID_LO = 1e-6
LOG_GRID_HI = 1e6
DEFAULT_GRID = 512
OPEN_EPS = 1e-9
SERIES_TOL = 1e-14


class NumericsError(ArithmeticError):
    """Base class for failures of the scalar solvers."""


class NoSignChange(NumericsError):
    pass


class MaxIterExceeded(NumericsError):
    pass


class EmptyDomain(NumericsError):
    pass


class TailBoundUnavailable(NumericsError):
    pass


@dataclass(frozen=True)
class RootSpec:
    func: Callable[[float], float]
    lo: float
    hi: float
    tol: float = BISECT_TOL
    max_iter: int = BISECT_MAX_ITER


def bisect(spec: RootSpec) -> float:
    """Root of a sign-changing function on [lo, hi] to bracket width `tol`."""
    lo, hi = float(spec.lo), float(spec.hi)
    flo, fhi = spec.func(lo), spec.func(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if not (np.isfinite(flo) and np.isfinite(fhi)) or (flo > 0) == (fhi > 0):
        raise NoSignChange(f"f({lo:g})={flo:g}, f({hi:g})={fhi:g}")
    try:
        x, info = optimize.bisect(spec.func, lo, hi, xtol=spec.tol, maxiter=spec.max_iter,
                                  full_output=True, disp=False)
    except RuntimeError as exc:  # pragma: no cover - scipy only raises with disp=True
        raise MaxIterExceeded(str(exc)) from exc
    if not info.converged:
        raise MaxIterExceeded(f"no convergence after {info.iterations} iterations")
    return float(x)


@dataclass(frozen=True)
class RootResult:
    """Solution of a monotone equation, or the limit it tends to at a boundary."""
    x: float
    residual: float
    at_boundary: bool = False


def solve_decreasing(func: Callable[[float], float], target: float, lo: float, hi: float,
                     *, sup: float, expand: bool = True, tol: float = BISECT_TOL) -> RootResult:
    """Solve func(x) = target for func strictly decreasing on (lo, hi].

    `sup` is the limit of func as x -> lo+. A target at or above it has no
    interior solution and is reported as the boundary point lo. When
    `expand` is set the upper end doubles until func drops below target.
    """
    if target >= sup:
        return RootResult(lo, target - sup, True)
    g = lambda x: func(x) - target
    b = hi
    n = 0
    while g(b) > 0:
        if not expand or n >= 200:
            raise NoSignChange(f"target {target:g} below func({b:g})={func(b):g}")
        b = lo + 2.0 * (b - lo)
        n += 1
    a = lo + min(1e-3, 0.5 * (b - lo))
    n = 0
    while g(a) < 0:
        a = lo + 0.5 * (a - lo)
        n += 1
        if n > 1000 or a == lo:
            return RootResult(lo, abs(sup - target), True)
    x = bisect(RootSpec(g, a, b, tol=tol))
    return RootResult(x, abs(g(x)), False)


@dataclass
class MaxResult:
    argmax: float
    value: float
    xs: np.ndarray = field(repr=False)
    fs: np.ndarray = field(repr=False)

    def __iter__(self) -> Iterator[float]:
        yield self.argmax
        yield self.value


@dataclass(frozen=True)
class MaximizeSpec:
    """A 1-D maximization problem.

    `hi` may be ``inf``; the scan then uses a log grid capped at LOG_GRID_HI.
    `open_lo`/`open_hi` shrink the interval by OPEN_EPS so that functions
    singular at the endpoints are never evaluated there.
    """
    func: Callable[[float], float]
    lo: float
    hi: float
    grid: int = DEFAULT_GRID
    tol: float = 1e-10
    open_lo: bool = False
    open_hi: bool = False
    log_grid: bool | None = None
    vectorized: bool = False  # func accepts a numpy array for the grid scan
    zoom: int = 4  # vectorized only: rescans of the best cell instead of Brent
    zoom_grid: int = 33


def _safe(func, x):
    v = float(func(x))
    return v if v == v else -math.inf  # NaN counts as infeasible


def maximize_1d(spec: MaximizeSpec) -> MaxResult:
    """Coarse grid scan followed by bounded Brent/golden refinement.

    Vectorized objectives are refined by `zoom` rescans of the best cell
    instead, which costs a handful of array calls rather than dozens of
    scalar ones.

    Global in the heuristic sense only: the best grid cell is refined.
    """
    if spec.grid < 3:
        raise ValueError("grid size must be at least 3")
    lo, hi = float(spec.lo), float(spec.hi)
    if not lo <= hi:
        raise EmptyDomain(f"[{lo}, {hi}]")
    unbounded = math.isinf(hi)
    use_log = spec.log_grid if spec.log_grid is not None else unbounded
    if unbounded:
        hi = LOG_GRID_HI
    if use_log and lo <= 0:
        lo = LOG_GRID_LO  # a log grid needs a positive left end
    if spec.open_lo:
        lo = lo + OPEN_EPS * max(1.0, abs(lo)) if not use_log else lo * (1 + OPEN_EPS)
    if spec.open_hi:
        hi = hi - OPEN_EPS * max(1.0, abs(hi)) if not use_log else hi * (1 - OPEN_EPS)
    if lo > hi:
        raise EmptyDomain("interval vanishes after removing open endpoints")
    if lo == hi:
        v = _safe(spec.func, lo)
        return MaxResult(lo, v, np.array([lo]), np.array([v]))

    if use_log:
        us = np.linspace(math.log(lo), math.log(hi), spec.grid)
        to_x = math.exp
    else:
        us = np.linspace(lo, hi, spec.grid)
        to_x = float
    xs = [to_x(u) for u in us]
    xs[0], xs[-1] = lo, hi
    if spec.vectorized:
        fs = np.asarray(spec.func(np.asarray(xs, dtype=float)), dtype=float)
        fs = np.where(np.isnan(fs), -np.inf, fs)
    else:
        fs = np.array([_safe(spec.func, x) for x in xs])
    i = int(np.argmax(fs))
    best_x, best_f = xs[i], fs[i]
    if math.isfinite(best_f) and spec.vectorized and spec.zoom > 0:
        # repeated finer scans of the two cells around the incumbent
        xs_all, fs_all = [np.asarray(xs, float)], [fs]
        best_u = us[i]
        step = (us[-1] - us[0]) / (len(us) - 1)
        u_lo, u_hi = us[0], us[-1]
        for _ in range(spec.zoom):
            a, b = max(best_u - step, u_lo), min(best_u + step, u_hi)
            uz = np.linspace(a, b, spec.zoom_grid)
            xz = np.exp(uz) if use_log else uz
            xz = np.clip(xz, lo, hi)
            fz = np.asarray(spec.func(xz), dtype=float)
            fz = np.where(np.isnan(fz), -np.inf, fz)
            j = int(np.argmax(fz))
            if fz[j] > best_f:
                best_x, best_f, best_u = float(xz[j]), float(fz[j]), float(uz[j])
            xs_all.append(xz)
            fs_all.append(fz)
            step = (b - a) / (spec.zoom_grid - 1)
        xs, fs = np.concatenate(xs_all), np.concatenate(fs_all)
    elif math.isfinite(best_f):
        a, b = us[max(i - 1, 0)], us[min(i + 1, len(us) - 1)]
        obj = lambda u: -_safe(spec.func, to_x(u))
        xtol = spec.tol if not use_log else spec.tol / max(best_x, 1e-300)
        r = optimize.minimize_scalar(obj, bounds=(a, b), method="bounded",
                                     options={"xatol": max(xtol, 1e-14)})
        x_r = min(max(to_x(r.x), lo), hi)
        f_r = _safe(spec.func, x_r)
        extra_x, extra_f = [x_r], [f_r]
        if f_r > best_f:
            best_x, best_f = x_r, f_r
        xs = np.concatenate([xs, extra_x])
        fs = np.concatenate([fs, extra_f])
    return MaxResult(float(best_x), float(best_f), np.asarray(xs, float), fs)


def q_func(x):
    """Standard normal upper tail Q(x)."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def series_sum(terms: Iterable[float], tail_bound: Callable[[int], float] | None,
               *, tol: float = SERIES_TOL, min_terms: int = 0,
               max_terms: int = 10**7) -> float:
    """Sum a convergent series, stopping once the certified remainder is below tol.

    `tail_bound(n)` must bound the absolute sum of every term after the first
    n. An exhausted generator ends the sum early (its tail is zero).
    """
    if tail_bound is None:
        raise TailBoundUnavailable("a tail bound is required to certify the sum")
    acc = []
    it = iter(terms)
    n = 0
    while n < max_terms:
        if n >= min_terms and tail_bound(n) <= tol:
            break
        try:
            acc.append(next(it))
        except StopIteration:
            break
        n += 1
    else:
        raise TailBoundUnavailable(f"tail bound above {tol:g} after {max_terms} terms")
    return math.fsum(acc)
