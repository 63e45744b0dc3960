"""Sum-capacity bounds for the two-user optical intensity MAC with Gaussian noise.

Three constraint families are covered: peak only, average only, and peak plus
average. Every value is in nats. Lower bounds that come from a concrete
input pair carry that pair, so callers can audit support and mean
constraints point by point.

Units follow the usual normalisation: peaks (or averages, for the average
family) sum to one and the noise level sigma is rescaled with them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import maxent
from .decomp import (Check, decompose_exp_verdu, decompose_geometric, decompose_truncexp_binary,
                     decompose_truncexp_contracted, decompose_truncgeom, decompose_uniform_binary)
from .dists import (DiscreteUniformSpaced, ScalarDist, TruncGeomSpaced, Uniform)
from .numerics import (MaximizeSpec, NoSignChange, maximize_1d, q_func, solve_decreasing)

LOG_2PIE = math.log(2 * math.pi * math.e)
SQRT_2PIE = math.sqrt(2 * math.pi * math.e)
SUM_TOL = 1e-12
ADMIT_TOL = 1e-12     # float floor for admissibility margins

K_MAX = 64            # largest k tried by the truncated-exponential sweep
POINTS_MAX = 2 ** 10  # largest constellation used by discrete bounds
K1_GRID = (2, 3, 4, 5, 6, 8, 10, 12, 16, 24, 32)
ALPHA_GRID = 17       # points on [alpha1, alpha2] for the surrogate channel
T_GRID = 256          # grid of the inner maximisations over t, l or eta
S_HI = 36.0           # rate cap: t = 1 - e^{-s} must stay below 1 in double precision


class CapacityError(ValueError):
    pass


class NonPositiveParameter(CapacityError):
    pass


class InfeasibleConstraints(CapacityError):
    pass


class InfeasibleWindow(CapacityError):
    pass


class PeakNotReciprocal(CapacityError):
    pass


class ConditionViolated(CapacityError):
    pass


class RootBracketFailure(CapacityError):
    pass


# ---------------------------------------------------------------- configs

class Family(str, Enum):
    PEAK = "peak"
    AVERAGE = "average"
    PEAK_AVERAGE = "peak_average"


@dataclass(frozen=True)
class ChannelConfig:
    """Normalised two-user channel.

    Unconstrained quantities are ``inf``: the average family has no peaks
    and the peak family no averages.
    """
    family: Family
    A1: float = math.inf
    A2: float = math.inf
    E1: float = math.inf
    E2: float = math.inf
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.sigma > 0:
            raise NonPositiveParameter("sigma must be positive")
        if self.family is not Family.AVERAGE:
            if abs(self.A1 + self.A2 - 1) > SUM_TOL:
                raise CapacityError(f"peaks must sum to 1, got {self.A1 + self.A2}")
            if not 0 < self.A1 <= self.A2:
                raise CapacityError("need 0 < A1 <= A2")
        if self.family is Family.AVERAGE:
            if abs(self.E1 + self.E2 - 1) > SUM_TOL:
                raise CapacityError(f"averages must sum to 1, got {self.E1 + self.E2}")
            if not (self.E1 > 0 and self.E2 > 0):
                raise NonPositiveParameter("averages must be positive")
        if self.family is Family.PEAK_AVERAGE:
            for a in (self.alpha1, self.alpha2):
                if not 0 < a <= 0.5 + SUM_TOL:
                    raise CapacityError(f"average-to-peak ratios must lie in (0, 1/2], got {a}")

    @classmethod
    def peak(cls, A1: float, sigma: float = 1.0) -> "ChannelConfig":
        return cls(Family.PEAK, A1=A1, A2=1.0 - A1, sigma=sigma)

    @classmethod
    def average(cls, E1: float, sigma: float = 1.0) -> "ChannelConfig":
        return cls(Family.AVERAGE, E1=E1, E2=1.0 - E1, sigma=sigma)

    @classmethod
    def peak_average(cls, A1: float, alpha1: float, alpha2: float | None = None,
                     sigma: float = 1.0) -> "ChannelConfig":
        alpha2 = alpha1 if alpha2 is None else alpha2
        A2 = 1.0 - A1
        return cls(Family.PEAK_AVERAGE, A1=A1, A2=A2, E1=alpha1 * A1, E2=alpha2 * A2,
                   sigma=sigma)

    @property
    def alpha1(self) -> float:
        return self.E1 / self.A1

    @property
    def alpha2(self) -> float:
        return self.E2 / self.A2

    @property
    def alpha_w(self) -> float:
        return self.E1 + self.E2

    @property
    def equal_ratio(self) -> bool:
        return abs(self.alpha1 - self.alpha2) <= 1e-12

    def with_sigma(self, sigma: float) -> "ChannelConfig":
        return replace(self, sigma=sigma)

    def key(self) -> tuple:
        """Everything except sigma; used to cache sigma-independent solves."""
        return (self.family.value, self.A1, self.A2, self.E1, self.E2)

    def to_dict(self) -> dict:
        out = {"family": self.family.value, "sigma": self.sigma}
        for name in ("A1", "A2", "E1", "E2"):
            v = getattr(self, name)
            if math.isfinite(v):
                out[name] = v
        return out


def normalize_config(h1: float, h2: float, A1: float | None = None, A2: float | None = None,
                     E1: float | None = None, E2: float | None = None,
                     sigma: float = 1.0) -> ChannelConfig:
    """Rescale a channel with gains h_j so that peaks (or averages) sum to one.

    With peaks present, S = h1 A1 + h2 A2, every intensity becomes h_j x / S
    and sigma becomes sigma / S; the average family uses h1 E1 + h2 E2.
    Users are swapped when needed so that user 1 has the smaller peak
    (smaller average, for the average family).
    """
    vals = [h1, h2, sigma] + [x for x in (A1, A2, E1, E2) if x is not None]
    if any(not v > 0 for v in vals):
        raise NonPositiveParameter("gains, constraints and sigma must be positive")
    has_peak = A1 is not None and A2 is not None
    has_avg = E1 is not None and E2 is not None
    if not (has_peak or has_avg):
        raise CapacityError("give both peaks, both averages, or all four")
    if has_peak:
        S = h1 * A1 + h2 * A2
        p1, p2 = h1 * A1 / S, h2 * A2 / S
        if has_avg:
            e1, e2 = h1 * E1 / S, h2 * E2 / S
            if p1 > p2:
                p1, p2, e1, e2 = p2, p1, e2, e1
            return ChannelConfig(Family.PEAK_AVERAGE, A1=p1, A2=1.0 - p1, E1=e1, E2=e2,
                                 sigma=sigma / S)
        if p1 > p2:
            p1, p2 = p2, p1
        return ChannelConfig(Family.PEAK, A1=p1, A2=1.0 - p1, sigma=sigma / S)
    S = h1 * E1 + h2 * E2
    e1, e2 = sorted((h1 * E1 / S, h2 * E2 / S))
    return ChannelConfig(Family.AVERAGE, E1=e1, E2=1.0 - e1, sigma=sigma / S)


def snr_to_sigma(snr_db, convention: int = 10):
    """sigma for an SNR in dB, where SNR = 1/sigma and dB = convention * log10(SNR)."""
    if convention not in (10, 20):
        raise CapacityError("dB convention must be 10 or 20")
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / convention)


# ---------------------------------------------------------------- building blocks

def fn_f(c: float, v: float) -> float:
    return maxent.f(c, v)


def fn_g(c: float, v: float, m: int) -> float:
    return maxent.g(c, v, m)


def fn_h(c: float, v: float) -> float:
    return maxent.h(c, v)


_R_C = math.sqrt(4.5 * math.pi)


def fn_R(u):
    """Upper bound on H(X_D | X_D + Z) for atoms at least 2l apart, u = sigma / l.

    For u <= 1e-3 the factor Q(1/u) underflows to zero and so does R; u = 0
    is accepted as that limit.
    """
    ua = np.asarray(u, dtype=float)
    if np.any(ua < 0):
        raise NonPositiveParameter("u must be positive")
    us = np.maximum(ua, 1e-3)
    q = q_func(1.0 / us)
    val = 2 * q * (2 + 0.5 / us ** 2 + np.log(5 + 2 * us ** 2) + np.log1p(_R_C * us))
    val = np.where(ua <= 1e-3, 0.0, val)
    return float(val) if np.ndim(val) == 0 else val


def _epi(log_power, sigma):
    """1/2 log(1 + e^{log_power} / (2 pi e sigma^2)) without overflow."""
    return 0.5 * float(np.logaddexp(0.0, log_power - LOG_2PIE - 2 * math.log(sigma)))


def _ifloor(x: float) -> int:
    return int(math.floor(x + 1e-9))


def _iceil(x: float) -> int:
    return int(math.ceil(x - 1e-9))


def _rate(t: float) -> float:
    return -math.log1p(-t)


def _success(s):
    return -np.expm1(-np.asarray(s, dtype=float))


def _solve_down(func, target, sup, what):
    """Root of a decreasing func on (0, inf) reaching sup at 0+; 0 if target >= sup."""
    try:
        r = solve_decreasing(func, target, 0.0, 1.0, sup=sup)
    except NoSignChange as exc:
        raise RootBracketFailure(f"{what}: {exc}") from exc
    return 0.0 if r.at_boundary else r.x


def _nudge_up(func, x, bound):
    """Smallest float step above x that keeps func(x) <= bound (func decreasing)."""
    n = 0
    while x > 0 and func(x) > bound and n < 64:
        x = x * (1 + 2.0 ** (n - 52))
        n += 1
    return x


# ---------------------------------------------------------------- bound values

@dataclass(frozen=True)
class InputPair:
    """Independent inputs (X1, X2), each scaled by `scale` before use."""
    x1: ScalarDist
    x2: ScalarDist
    scale: float = 1.0


@dataclass(frozen=True)
class BoundValue:
    value: float
    params: dict = field(default_factory=dict)
    pair: InputPair | None = None

    def __float__(self):
        return float(self.value)


def admissibility(pair: InputPair, config: ChannelConfig) -> tuple[Check, ...]:
    """Support and mean constraints of `pair` under `config`, with margins."""
    out = []
    for j, (x, A, E) in enumerate(((pair.x1, config.A1, config.E1),
                                   (pair.x2, config.A2, config.E2)), start=1):
        lo, hi = x.support()
        lo, hi = lo * pair.scale, hi * pair.scale
        out.append(Check(f"X{j} >= 0", lo >= -ADMIT_TOL, lo))
        if math.isfinite(A):
            m = A - hi
            out.append(Check(f"X{j} <= A{j}", m >= -ADMIT_TOL, m))
        if math.isfinite(E):
            m = E - x.mean() * pair.scale
            out.append(Check(f"E[X{j}] <= E{j}", m >= -ADMIT_TOL, m))
    return tuple(out)


# ---------------------------------------------------------------- single user

def su_lb_peak(K: int, sigma: float) -> float:
    """(K+1) equiprobable atoms spanning [0, 1]."""
    if K < 2:
        raise CapacityError("K must be at least 2")
    return math.log(K + 1) - fn_R(2 * K * sigma)


def _tg_objective(s, n_pts, alpha, sigma):
    m = maxent.tg_mean_rate_v(s, n_pts)
    return maxent.tg_entropy_rate_v(s, n_pts) - fn_R(2 * m * sigma / alpha)


def su_lb_average(K: int | float, alpha: float, sigma: float) -> BoundValue:
    """Truncated geometric input on K+1 atoms, or geometric when K is infinite.

    The finite case is optimised over the rate s = -log(1 - t) on a log grid,
    which resolves both the uniform end (t -> 0) and the single-atom end.
    """
    if not (alpha > 0 and sigma > 0):
        raise NonPositiveParameter("alpha and sigma must be positive")
    if math.isinf(K):
        def obj(l):
            r = alpha / (2 * l)
            return np.log1p(r) + r * np.log1p(1 / r) - fn_R(sigma / l)
        res = maximize_1d(MaximizeSpec(obj, 0.0, math.inf, grid=T_GRID, vectorized=True))
        return BoundValue(res.value, {"l": res.argmax})
    if K < 1:
        raise CapacityError("K must be at least 1")
    res = maximize_1d(MaximizeSpec(lambda s: _tg_objective(s, K + 1, alpha, sigma),
                                   1e-6, S_HI, grid=T_GRID, log_grid=True, vectorized=True))
    t = float(_success(res.argmax))
    return BoundValue(res.value, {"t": t, "l": alpha / (2 * maxent.tg_mean(t, K + 1))})


def su_eta(K: int, alpha: float) -> float:
    """Success parameter at which the (K+1)-atom truncated geometric on [0, 1] has mean alpha.

    The mean index is decreasing in the rate, equal to K/2 at rate 0, so the
    equation m(eta) = alpha K has a solution exactly when alpha < 1/2.
    """
    s = _solve_down(lambda s: maxent.tg_mean_rate(s, K + 1), alpha * K, K / 2, "eta")
    return float(_success(s))


def su_lb_peak_average(K: int, alpha: float, sigma: float) -> BoundValue:
    if K < 2:
        raise CapacityError("K must be at least 2")
    if not 0 < alpha <= 0.5 + SUM_TOL:
        raise CapacityError("alpha must lie in (0, 1/2]")
    if alpha >= 0.5:
        # the mean constraint is inactive: equiprobable atoms
        return BoundValue(su_lb_peak(K, sigma), {"eta": 0.0, "t": 0.0, "l": 1 / (2 * K)})
    eta = su_eta(K, alpha)
    s_eta = _rate(eta)
    res = maximize_1d(MaximizeSpec(lambda s: _tg_objective(s, K + 1, alpha, sigma),
                                   s_eta * 1e-6, s_eta, grid=T_GRID, log_grid=True,
                                   open_hi=True, vectorized=True))
    t = float(_success(res.argmax))
    return BoundValue(res.value, {"eta": eta, "t": t,
                                  "l": alpha / (2 * maxent.tg_mean(t, K + 1))})


# ---------------------------------------------------------------- peak family

def mac_peak_upper(sigma: float) -> float:
    return min(0.5 * math.log1p(1 / (4 * sigma ** 2)), math.log1p(1 / (SQRT_2PIE * sigma)))


def mac_peak_lower_epi(A1: float, sigma: float) -> BoundValue:
    """Uniform[0,1] split by binary digits; h(X1 + X2) = 0."""
    sp = decompose_uniform_binary(A1)
    return BoundValue(_epi(0.0, sigma), {}, InputPair(sp.u1, sp.u2))


def mac_peak_lower_floorceil(A1: float, sigma: float) -> BoundValue:
    k = _iceil(1 / A1)
    m = _ifloor(1 / A1)
    width = m / k
    pair = InputPair(Uniform(0.0, 1.0 / k), DiscreteUniformSpaced(0.0, 1.0 / k, m))
    return BoundValue(_epi(2 * math.log(width), sigma), {"k": k, "width": width}, pair)


def _peak_discrete_value(A1, n, sigma):
    return math.log(n * _ifloor(1 / A1)) - fn_R(2 * n * sigma / A1)


def mac_peak_lower_discrete(A1: float, sigma: float, n: int | None = None) -> BoundValue:
    """Equi-spaced uniform constellation of n * floor(1/A1) atoms.

    With n omitted the best n in 2..POINTS_MAX // floor(1/A1) is returned.
    """
    m = _ifloor(1 / A1)
    if n is None:
        cands = range(2, max(2, POINTS_MAX // m) + 1)
        n = max(cands, key=lambda c: (_peak_discrete_value(A1, c, sigma), -c))
    elif n < 2:
        raise CapacityError("n must be at least 2")
    pair = InputPair(DiscreteUniformSpaced(0.0, A1 / n, n), DiscreteUniformSpaced(0.0, A1, m))
    return BoundValue(_peak_discrete_value(A1, n, sigma), {"n": n}, pair)


def mac_peak_bounds(A1: float, sigma: float, n: int | None = None) -> dict:
    if not 0 < A1 <= 0.5:
        raise CapacityError("A1 must lie in (0, 1/2]")
    return {"upper": mac_peak_upper(sigma),
            "lower_epi": mac_peak_lower_epi(A1, sigma),
            "lower_floorceil": mac_peak_lower_floorceil(A1, sigma),
            "lower_discrete": mac_peak_lower_discrete(A1, sigma, n)}


# ---------------------------------------------------------------- average family

def mac_average_upper(sigma: float) -> float:
    return 0.5 * math.log(math.e / (2 * math.pi) * (1 / sigma + 2) ** 2)


def mac_average_lower_epi(E1: float, sigma: float) -> BoundValue:
    """Exponential(1) split into Exp(1/E1) and an atom-plus-exponential; h = 1."""
    sp = decompose_exp_verdu(E1)
    return BoundValue(_epi(2.0, sigma), {}, InputPair(sp.u1, sp.u2))


def mac_average_lower_geometric(E1: float, sigma: float) -> BoundValue:
    res = su_lb_average(math.inf, 1.0, sigma)
    l = res.params["l"]
    sp = decompose_geometric(2 * l / (2 * l + 1), 2 * l / (2 * l + E1), spacing=2 * l)
    return BoundValue(res.value, {"l": l}, InputPair(sp.u1, sp.u2))


def _lattice_n(s, K1, cap, n_cap):
    """Largest m <= n_cap with mean index of the (m K1)-atom law <= cap (at least 1)."""
    s = np.atleast_1d(s)
    ms = np.arange(1, n_cap + 1)
    means = maxent.tg_mean_rate_v(s[:, None], ms[None, :] * K1)
    ok = means <= np.atleast_1d(cap)[:, None] * (1 + 1e-13)
    return np.maximum(ok.sum(axis=1), 1)


def _lattice_objective(s, K1, E1, sigma, cap_of, n_cap):
    s1 = np.atleast_1d(s)
    m1 = maxent.tg_mean_rate_v(s1, K1)
    n = _lattice_n(s1, K1, cap_of(m1), n_cap)
    val = maxent.tg_entropy_rate_v(s1, n * K1) - fn_R(2 * m1 * sigma / E1)
    return val if np.ndim(s) else float(val[0])


def _lattice_pair(t, K1, n, E1):
    two_l = E1 / maxent.tg_mean(t, K1)
    if n >= 2:
        sp = decompose_truncgeom(K1 - 1, n, t, spacing=two_l)
        return InputPair(sp.u1, sp.u2), two_l
    return InputPair(TruncGeomSpaced(t, two_l, K1), DiscreteUniformSpaced(0.0, 1.0, 1)), two_l


def _lattice_best(K1s, E1, sigma, cap_of, n_cap_of, s_hi_of):
    best = None
    for K1 in K1s:
        s_hi = s_hi_of(K1)
        if s_hi is None:
            continue
        n_cap = n_cap_of(K1)
        res = maximize_1d(MaximizeSpec(
            lambda s: _lattice_objective(s, K1, E1, sigma, cap_of, n_cap),
            s_hi * 1e-6 if math.isfinite(s_hi) else 1e-6, s_hi if math.isfinite(s_hi) else S_HI,
            grid=T_GRID, log_grid=True, open_hi=math.isfinite(s_hi), vectorized=True))
        if best is None or res.value > best[0]:
            s = res.argmax
            t = float(_success(s))
            n = int(_lattice_n(s, K1, cap_of(maxent.tg_mean_rate(s, K1)), n_cap)[0])
            best = (res.value, K1, t, n)
    return best


def mac_average_lower_truncgeom(E1: float, sigma: float, K1: int | None = None,
                                K1_grid: Sequence[int] = K1_GRID) -> BoundValue:
    """Truncated geometric lattice split between users.

    For each t, l follows from E[X1] = E1, and n is the largest lattice
    multiplier whose total mean stays within 1 (capped at POINTS_MAX atoms).
    The entropy uses K = n K1 atoms while the noise penalty uses the spacing
    fixed by K1.
    """
    K1s = K1_grid if K1 is None else (K1,)
    if any(k < 2 for k in K1s):
        raise CapacityError("K1 must be at least 2")
    # mean index of the total law is at most 1 / (2l) = m1 / E1
    best = _lattice_best(K1s, E1, sigma, lambda m1: m1 / E1,
                         lambda K1: max(1, POINTS_MAX // K1), lambda K1: math.inf)
    value, K1, t, n = best
    pair, two_l = _lattice_pair(t, K1, n, E1)
    return BoundValue(value, {"K1": K1, "t": t, "n": n, "l": two_l / 2}, pair)


def mac_average_bounds(E1: float, sigma: float, K1: int | None = None) -> dict:
    return {"upper": mac_average_upper(sigma),
            "lower_epi": mac_average_lower_epi(E1, sigma),
            "lower_geometric": mac_average_lower_geometric(E1, sigma),
            "lower_truncgeom": mac_average_lower_truncgeom(E1, sigma, K1)}


# ---------------------------------------------------------------- peak + average

def _eta_prime(alpha_w: float) -> float:
    """Solution of f(1, eta') = alpha_w; 0 in the uniform limit alpha_w >= 1/2."""
    return _solve_down(lambda v: maxent.f(1.0, v), alpha_w, 0.5, "eta'")


def mac_pa_upper(alpha_w: float, sigma: float) -> BoundValue:
    """Minimum over eta > 0 of the single-user upper bound at alpha_w.

    params carry the minimiser and the high-SNR limit of C + log sigma.
    """
    if not 0 < alpha_w <= 1:
        raise CapacityError("alpha_w must lie in (0, 1]")
    tail = sigma / math.sqrt(2 * math.pi) * -math.expm1(-1 / (2 * sigma ** 2))

    def neg(eta):
        shape = np.exp(maxent.log_shape(eta))
        return -(np.log1p(shape / (SQRT_2PIE * sigma)) + eta * tail + eta * alpha_w)

    res = maximize_1d(MaximizeSpec(neg, 0.0, math.inf, grid=2 * T_GRID, vectorized=True))
    at_zero = math.log1p(1 / (SQRT_2PIE * sigma))
    value, eta = (-res.value, res.argmax) if -res.value < at_zero else (at_zero, 0.0)
    ep = _eta_prime(alpha_w)
    return BoundValue(value, {"eta": eta, "eta_prime": ep,
                              "asymptote": pa_asymptote(alpha_w)})


def _require_equal(config: ChannelConfig):
    if config.family is not Family.PEAK_AVERAGE:
        raise CapacityError("needs a peak-and-average configuration")
    if not config.equal_ratio:
        raise CapacityError("needs alpha1 == alpha2; use mac_pa_lower_general")


def _lattice_width(A1: float, k: int) -> tuple[float, int]:
    c = _iceil(A1 * k)
    return 1.0 / k + 1.0 - c / k, k - c + 1


@lru_cache(maxsize=4096)
def _truncexp_solve(A1: float, E1: float, E2: float, k: int):
    l, m = _lattice_width(A1, k)
    f1 = lambda v: maxent.f(1.0 / k, v)
    g2 = lambda v: maxent.g(l, v, m)
    e1 = _solve_down(f1, E1, 1 / (2 * k), "eta1")
    e2 = _solve_down(g2, E2, maxent.g(l, 0.0, m), "eta2")
    eta = max(e1, e2)
    if eta > 0:
        eta = _nudge_up(g2, _nudge_up(f1, eta, E1), E2)
    return l, m, eta


def mac_pa_lower_truncexp(config: ChannelConfig, k: int | None = None, *,
                      form: str = "printed", k_max: int = K_MAX) -> BoundValue:
    """Truncated exponential on [0, l] split into a contracted copy and a lattice.

    ``form="printed"`` uses the exponent 2 alpha* eta* l as stated with the
    bound; ``form="exact"`` uses 2 alpha* eta*, which is 2 h(l, eta*) - 2 log
    of the shape factor, i.e. the entropy of the constructed sum. The printed
    exponent is smaller (l <= 1), so it is the more conservative value.
    With k omitted every k from ceil(1/A1) to max(k_max, ceil(1/A1)) is tried.
    """
    _require_equal(config)
    if form not in ("printed", "exact"):
        raise CapacityError("form must be 'printed' or 'exact'")
    k0 = _iceil(1 / config.A1)
    if k is not None:
        if k < k0:
            raise InfeasibleConstraints(f"k must be at least ceil(1/A1) = {k0}")
        ks = (k,)
    else:
        ks = range(k0, max(k_max, k0) + 1)
    best = None
    for kk in ks:
        bv = _truncexp_at(config, kk, form)
        if best is None or bv.value > best.value:
            best = bv
    return best


def _truncexp_at(config, k, form):
    sigma = config.sigma
    l, m, eta = _truncexp_solve(config.A1, config.E1, config.E2, k)
    if eta == 0.0:
        pair = InputPair(Uniform(0.0, 1.0 / k), DiscreteUniformSpaced(0.0, 1.0 / k, m))
        return BoundValue(_epi(2 * math.log(l), sigma),
                          {"k": k, "l": l, "eta": 0.0, "case": 1}, pair)
    alpha = maxent.f(l, eta)
    expo = 2 * alpha * eta * (l if form == "printed" else 1.0)
    log_shape = math.log(-math.expm1(-eta * l) / eta)
    # m = k - ceil(A1 k) + 1 >= 2 because A1 <= 1/2
    sp = decompose_truncexp_contracted(m, eta, width=l)
    pair = InputPair(sp.u1, sp.u2)
    return BoundValue(_epi(expo + 2 * log_shape, sigma),
                      {"k": k, "l": l, "eta": eta, "alpha": alpha, "case": 2}, pair)


def mac_pa_lower_reciprocal(config: ChannelConfig, k: int, n: int) -> dict:
    """Both bounds for A1 = 1/k: a fine lattice (bound1) and the full-width split (bound2)."""
    _require_equal(config)
    if k < 2 or abs(config.A1 - 1.0 / k) > SUM_TOL:
        raise PeakNotReciprocal(f"A1 = {config.A1} is not 1/{k}")
    aw = config.alpha_w
    if n < math.ceil(2 / aw - 1e-12):
        raise CapacityError(f"n must be at least ceil(2/alpha_w) = {math.ceil(2 / aw - 1e-12)}")
    sigma = config.sigma

    l = 1 - 1 / k + 1 / (n * k)
    m = n * (k - 1) + 1
    g2 = lambda v: maxent.g(l, v, m)
    target = (1 - 1 / k) * aw
    ep = _solve_down(g2, target, maxent.g(l, 0.0, m), "eta'")
    if ep == 0.0:
        b1 = BoundValue(_epi(2 * math.log(l), sigma), {"l": l, "eta": 0.0},
                        InputPair(Uniform(0.0, 1 / (n * k)),
                                  DiscreteUniformSpaced(0.0, 1 / (n * k), m)))
    else:
        ep = _nudge_up(g2, ep, target)
        a1 = maxent.f(1.0, ep * l)
        sp = decompose_truncexp_contracted(m, ep, width=l)
        b1 = BoundValue(_epi(2 * a1 * ep * l + 2 * math.log(-math.expm1(-ep * l) / ep), sigma),
                        {"l": l, "eta": ep, "alpha": a1, "residual": abs(g2(ep) - target)},
                        InputPair(sp.u1, sp.u2))

    f1 = lambda v: maxent.f(1.0 / k, v)
    es = _solve_down(f1, aw / k, 1 / (2 * k), "eta*")
    if es == 0.0:
        sp = None
        b2 = BoundValue(_epi(0.0, sigma), {"eta": 0.0},
                        InputPair(Uniform(0.0, 1 / k), DiscreteUniformSpaced(0.0, 1 / k, k)))
    else:
        es = _nudge_up(f1, es, aw / k)
        a2 = maxent.f(1.0, es)
        sp = decompose_truncexp_contracted(k, es)
        b2 = BoundValue(_epi(2 * a2 * es + 2 * math.log(-math.expm1(-es) / es), sigma),
                        {"eta": es, "alpha": a2, "residual": abs(f1(es) - aw / k)},
                        InputPair(sp.u1, sp.u2))
    return {"bound1": b1, "bound2": b2}


def gap_condition(config: ChannelConfig, k: int) -> tuple[bool, float]:
    """(holds, margin) for f(1/k, eta'/l) <= E1 with f(1, eta') = alpha_w."""
    _require_equal(config)
    l, _ = _lattice_width(config.A1, k)
    ep = _eta_prime(config.alpha_w)
    margin = config.E1 - maxent.f(1.0 / k, ep / l)
    return margin >= 0, margin


def mac_pa_gap(config: ChannelConfig, k: int) -> float:
    """Certified high-SNR gap -log l between the upper bound and the truncated-exponential bound."""
    _require_equal(config)
    if k < _iceil(1 / config.A1):
        raise InfeasibleConstraints("k must be at least ceil(1/A1)")
    holds, margin = gap_condition(config, k)
    if not holds:
        raise ConditionViolated(f"f(1/k, eta'/l) exceeds E1 by {-margin:.3g}")
    l, _ = _lattice_width(config.A1, k)
    return -math.log(l)


def mac_pa_lower_discrete(config: ChannelConfig, K1: int | None = None,
                          K1_grid: Sequence[int] = K1_GRID) -> BoundValue:
    """Truncated geometric lattice under both constraints.

    Feasible t lie below eta*, where the K1-atom law with spacing 2l = A1/K1
    has mean exactly E1; that needs alpha < (K1 - 1) / (2 K1). K1 values
    outside this window are skipped by the sweep and rejected when asked
    for explicitly.
    """
    _require_equal(config)
    A1, E1, alpha = config.A1, config.E1, config.alpha_w
    n_cap = max(1, _ifloor(1 / A1))

    def s_hi(K1):
        if alpha >= (K1 - 1) / (2 * K1):
            return None
        s = _solve_down(lambda s: maxent.tg_mean_rate(s, K1), alpha * K1,
                        (K1 - 1) / 2, "eta*")
        return s if s > 0 else None

    K1s = K1_grid if K1 is None else (K1,)
    if K1 is not None:
        if K1 < 2:
            raise CapacityError("K1 must be at least 2")
        if s_hi(K1) is None:
            raise InfeasibleWindow(f"alpha = {alpha} needs K1 > {1 / (1 - 2 * alpha):.3g}")
    # the total mean index may reach alpha / (2l) = m1 / A1
    best = _lattice_best(K1s, E1, config.sigma, lambda m1: m1 / A1,
                         lambda K1: n_cap, s_hi)
    if best is None:
        raise InfeasibleWindow("no K1 in the grid admits the feasibility window")
    value, K1, t, n = best
    pair, two_l = _lattice_pair(t, K1, n, E1)
    return BoundValue(value, {"K1": K1, "t": t, "n": n, "l": two_l / 2}, pair)


def mac_pa_lower_special(A1: float, eta_prime: float, sigma: float) -> dict:
    """Binary-digit split of the truncated exponential on [0, 1] with rate eta'.

    The induced ratios alpha1, alpha2 are outputs. The bound is the EPI with
    h(X1 + X2) = h(1, eta').
    """
    if not 0 < A1 <= 0.5:
        raise CapacityError("A1 must lie in (0, 1/2]")
    if not eta_prime > 0:
        raise NonPositiveParameter("eta' must be positive")
    sp = decompose_truncexp_binary(A1, eta_prime)
    a1 = sp.u1.mean() / A1
    a2 = sp.u2.mean() / (1 - A1)
    aw = maxent.f(1.0, eta_prime)
    val = _epi(2 * aw * eta_prime + 2 * math.log(-math.expm1(-eta_prime) / eta_prime), sigma)
    return {"alpha1": a1, "alpha2": a2,
            "bound": BoundValue(val, {"eta_prime": eta_prime, "alpha_w": aw},
                                InputPair(sp.u1, sp.u2))}


def alpha_grid(a_lo: float, a_hi: float, points: int = ALPHA_GRID) -> list[float]:
    """Points a_lo + (a_hi - a_lo) i / (points - 1). With points = 2^j + 1 the
    grids are nested exactly in floating point."""
    if points < 2 or a_hi == a_lo:
        return [a_lo]
    return [a_lo + (a_hi - a_lo) * (i / (points - 1)) for i in range(points)]


def surrogate(config: ChannelConfig, alpha: float) -> tuple[ChannelConfig, float, bool]:
    """Equal-ratio channel that is dominated by `config`.

    The lower-ratio user keeps its average E with peak E / alpha; the other
    keeps its peak A with average A alpha. Returns the normalised surrogate,
    the scale S (sum of surrogate peaks) and whether its users are swapped
    relative to `config`.
    """
    lo_first = config.alpha1 <= config.alpha2
    if lo_first:
        p1, p2 = config.E1 / alpha, config.A2
    else:
        p1, p2 = config.A1, config.E2 / alpha
    S = p1 + p2
    swapped = p1 > p2
    a = min(p1, p2) / S
    return ChannelConfig.peak_average(a, alpha, sigma=config.sigma / S), S, swapped


def mac_pa_lower_general(config: ChannelConfig, inner: str = "truncexp",
                         points: int = ALPHA_GRID, **kw) -> BoundValue:
    """Best equal-ratio lower bound over surrogate channels with alpha' in [alpha1, alpha2]."""
    if config.family is not Family.PEAK_AVERAGE:
        raise CapacityError("needs a peak-and-average configuration")
    fn = {"truncexp": mac_pa_lower_truncexp, "discrete": mac_pa_lower_discrete}[inner]
    lo, hi = sorted((config.alpha1, config.alpha2))
    best = None
    for a in alpha_grid(lo, hi, points):
        sub, S, swapped = surrogate(config, a)
        try:
            bv = fn(sub, **kw)
        except InfeasibleWindow:
            continue
        if best is None or bv.value > best[0].value:
            best = (bv, a, S, swapped)
    if best is None:
        raise InfeasibleWindow("no surrogate ratio admits the inner bound")
    bv, a, S, swapped = best
    pair = None
    if bv.pair is not None:
        x1, x2 = (bv.pair.x2, bv.pair.x1) if swapped else (bv.pair.x1, bv.pair.x2)
        pair = InputPair(x1, x2, bv.pair.scale * S)
    return BoundValue(bv.value, dict(bv.params, alpha_prime=a, scale=S), pair)


# ---------------------------------------------------------------- asymptotes

def pa_asymptote(alpha_w: float) -> float:
    """lim C + log sigma for the peak-and-average upper bound: h(1, eta') - 1/2 log(2 pi e)."""
    ep = _eta_prime(alpha_w)
    return maxent.h(1.0, ep) - 0.5 * LOG_2PIE


@dataclass(frozen=True)
class Asymptotes:
    peak: float = -0.5 * LOG_2PIE
    average: float = 0.5 * math.log(math.e / (2 * math.pi))

    @staticmethod
    def pa(alpha_w: float) -> float:
        return pa_asymptote(alpha_w)


def asymptotes() -> Asymptotes:
    return Asymptotes()


# ---------------------------------------------------------------- curves

@dataclass(frozen=True)
class BoundSpec:
    name: str
    kind: str   # "upper" or "lower"
    func: Callable[[ChannelConfig], "BoundValue | float"]


def _bv(x) -> BoundValue:
    return x if isinstance(x, BoundValue) else BoundValue(float(x))


def _pa_lower(inner):
    def run(c: ChannelConfig):
        if c.equal_ratio:
            return (mac_pa_lower_truncexp if inner == "truncexp" else mac_pa_lower_discrete)(c)
        return mac_pa_lower_general(c, inner)
    return run


BOUNDS: dict[Family, tuple[BoundSpec, ...]] = {
    Family.PEAK: (
        BoundSpec("upper", "upper", lambda c: mac_peak_upper(c.sigma)),
        BoundSpec("lower_epi", "lower", lambda c: mac_peak_lower_epi(c.A1, c.sigma)),
        BoundSpec("lower_floorceil", "lower", lambda c: mac_peak_lower_floorceil(c.A1, c.sigma)),
        BoundSpec("lower_discrete", "lower", lambda c: mac_peak_lower_discrete(c.A1, c.sigma)),
    ),
    Family.AVERAGE: (
        BoundSpec("upper", "upper", lambda c: mac_average_upper(c.sigma)),
        BoundSpec("lower_epi", "lower", lambda c: mac_average_lower_epi(c.E1, c.sigma)),
        BoundSpec("lower_geometric", "lower",
                  lambda c: mac_average_lower_geometric(c.E1, c.sigma)),
        BoundSpec("lower_truncgeom", "lower",
                  lambda c: mac_average_lower_truncgeom(c.E1, c.sigma)),
    ),
    Family.PEAK_AVERAGE: (
        BoundSpec("upper", "upper", lambda c: mac_pa_upper(c.alpha_w, c.sigma)),
        BoundSpec("lower_truncexp", "lower", _pa_lower("truncexp")),
        BoundSpec("lower_discrete", "lower", _pa_lower("discrete")),
    ),
}


def bound_names(family: Family | str) -> list[str]:
    return [b.name for b in BOUNDS[Family(family)]]


@dataclass
class BoundCurve:
    """One named bound over a sigma grid, sorted by sigma descending.

    Lower bounds are clamped at zero; the unclamped value is kept in
    params["raw"]. `pairs` holds the input pair behind each lower-bound point.
    """
    name: str
    kind: str
    family: Family
    points: list[tuple[float, float]]
    params: list[dict]
    pairs: list[InputPair | None] = field(default_factory=list, repr=False)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "family": self.family.value,
                "points": [list(p) for p in self.points], "params": self.params}


def sweep(config: ChannelConfig, sigmas: Sequence[float],
          names: Sequence[str] | None = None) -> list[BoundCurve]:
    """Evaluate the named bounds of config's family at every sigma.

    Points are independent; the result does not depend on evaluation order.
    """
    specs = BOUNDS[config.family]
    if names is not None:
        known = {b.name for b in specs}
        unknown = [n for n in names if n not in known]
        if unknown:
            raise CapacityError(f"unknown bounds for {config.family.value}: {unknown}")
        specs = tuple(b for b in specs if b.name in names)
    order = sorted(float(s) for s in sigmas)[::-1]
    curves = []
    for spec in specs:
        pts, prm, prs = [], [], []
        for s in order:
            bv = _bv(spec.func(config.with_sigma(s)))
            raw = float(bv.value)
            val = max(raw, 0.0) if spec.kind == "lower" else raw
            pts.append((s, val))
            prm.append(dict(_plain(bv.params), raw=raw))
            prs.append(bv.pair)
        curves.append(BoundCurve(spec.name, spec.kind, config.family, pts, prm, prs))
    return curves


def _plain(params: dict) -> dict:
    return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in params.items()}


FIGURES: dict[str, ChannelConfig] = {
    "fig3": ChannelConfig.peak(0.3),
    "fig4": ChannelConfig.average(0.44),
    "fig5": ChannelConfig.peak_average(0.3, 0.4),
    "fig6": ChannelConfig.peak_average(0.3, 0.1),
    "fig7": ChannelConfig.peak_average(0.3, 0.1, 0.4),
}


@dataclass(frozen=True)
class AuditRow:
    curve: str
    sigma: float
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.satisfied for c in self.checks)


def audit(curves: Sequence[BoundCurve], config: ChannelConfig) -> list[AuditRow]:
    """Admissibility of every input pair behind every lower-bound point."""
    rows = []
    for c in curves:
        if c.kind != "lower":
            continue
        for (s, _), pair in zip(c.points, c.pairs):
            if pair is None:
                rows.append(AuditRow(c.name, s, (Check("pair present", False, -math.inf),)))
            else:
                rows.append(AuditRow(c.name, s, admissibility(pair, config)))
    return rows


# ---------------------------------------------------------------- property checks

MONO_TOL = 1e-12


@dataclass(frozen=True)
class OrderingReport:
    """Lower <= upper at every point, monotone curves, admissible inputs."""
    name: str
    points: int
    min_gap: float                  # min over points of (min upper - max lower)
    nonmonotone: tuple[str, ...]
    audit_rows: int
    audit_failures: tuple[str, ...]
    audit_min_margin: float

    @property
    def passed(self) -> bool:
        return self.min_gap >= 0 and not self.nonmonotone and not self.audit_failures

    def to_dict(self) -> dict:
        return {"name": self.name, "points": self.points, "min_gap": self.min_gap,
                "nonmonotone": list(self.nonmonotone), "audit_rows": self.audit_rows,
                "audit_failures": list(self.audit_failures),
                "audit_min_margin": self.audit_min_margin, "pass": self.passed}


def check_ordering(config: ChannelConfig, sigmas: Sequence[float], name: str = "",
                   curves: Sequence[BoundCurve] | None = None) -> OrderingReport:
    curves = list(curves) if curves is not None else sweep(config, sigmas)
    up = np.min([c.values for c in curves if c.kind == "upper"], axis=0)
    lo = np.max([c.values for c in curves if c.kind == "lower"], axis=0)
    bad = []
    for c in curves:
        # points run from low to high SNR
        raw = np.array([p["raw"] for p in c.params]) if c.kind == "lower" else c.values
        for label, v in ((c.name, c.values), (c.name + " (raw)", raw)):
            if np.any(np.diff(v) < -MONO_TOL):
                bad.append(label)
    rows = audit(curves, config)
    fails = tuple(f"{r.curve} at sigma={r.sigma:.6g}" for r in rows if not r.passed)
    margins = [ch.margin for r in rows for ch in r.checks]
    return OrderingReport(name, len(up), float(np.min(up - lo)), tuple(bad), len(rows),
                          fails, float(min(margins)) if margins else math.inf)


@dataclass(frozen=True)
class AsymptoteRow:
    name: str
    value: float          # bound + log sigma
    target: float
    tol: float

    @property
    def passed(self) -> bool:
        return abs(self.value - self.target) <= self.tol


def check_asymptotes(sigma: float = 1e-4, A1: float = 0.3, E1: float = 0.44,
                     tol: float = 0.01) -> list[AsymptoteRow]:
    """bound + log sigma against the limiting constants at a small sigma."""
    a = asymptotes()
    ls = math.log(sigma)
    vals = [
        ("peak upper", mac_peak_upper(sigma), a.peak),
        ("peak lower_epi", mac_peak_lower_epi(A1, sigma).value, a.peak),
        ("average upper", mac_average_upper(sigma), a.average),
        ("average lower_epi", mac_average_lower_epi(E1, sigma).value, a.average),
    ]
    return [AsymptoteRow(n, float(v) + ls, t, tol) for n, v, t in vals]
