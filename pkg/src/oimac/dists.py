"""Scalar distributions used by the decompositions and the capacity bounds.

Each family is a frozen dataclass with closed-form characteristic function,
mean, entropy (where defined), sampler and CDF. Instances are immutable and
every method is pure, so they can be shared freely between threads.

The free functions ``cf_eval``, ``mean``, ``entropy`` and ``sample`` are thin
wrappers kept for callers that prefer a functional style.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import ClassVar

import numpy as np

from . import maxent

PROB_SUM_TOL = 1e-12
KS_CRIT_1PCT = 1.628  # asymptotic Kolmogorov quantile, two-sided, alpha = 0.01


class DistError(ValueError):
    pass


class MixedDistribution(DistError):
    """Entropy requested for a law with both an atom and a density."""


class UnsupportedOperation(DistError):
    pass


_REGISTRY: dict[str, type["ScalarDist"]] = {}


def _register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


def _as_array(t):
    return np.asarray(t, dtype=float)


def _ret(x, like):
    return complex(x) if np.ndim(like) == 0 else x


class ScalarDist:
    """Common interface. Subclasses fill in the closed forms."""

    kind: ClassVar[str] = ""
    discrete: ClassVar[bool] = False

    def cf(self, t):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def entropy(self) -> float:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """Closed interval containing the support."""
        raise NotImplementedError

    def sample(self, seed: int, n: int) -> np.ndarray:
        if n < 1:
            raise DistError("n must be at least 1")
        return self._draw(np.random.default_rng(seed), n)

    def _draw(self, rng, n):
        raise NotImplementedError

    def cdf(self, x):
        """P(X <= x)."""
        raise NotImplementedError

    def cdf_left(self, x):
        """P(X < x); differs from cdf only at atoms."""
        return self.cdf(x)

    def atoms(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(points, probs) for finitely supported laws, else None."""
        return None

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for fld in fields(self):
            val = getattr(self, fld.name)
            if isinstance(val, tuple):
                val = [list(v) for v in val]
            d[fld.name] = val
        return d


def from_dict(d: dict) -> ScalarDist:
    try:
        cls = _REGISTRY[d["kind"]]
    except KeyError as exc:
        raise DistError(f"unknown distribution kind {d.get('kind')!r}") from exc
    kw = {k: v for k, v in d.items() if k != "kind"}
    if cls is BernoulliSeries:
        kw["terms"] = tuple(tuple(map(float, tv)) for tv in kw["terms"])
    if cls is FiniteDiscrete:
        kw["atoms"] = tuple(tuple(map(float, a)) for a in kw["atoms"])
    return cls(**kw)


def _finite_cdf(points, probs, x, strict):
    x = _as_array(x)
    order = np.argsort(points)
    pts, cum = points[order], np.cumsum(probs[order])
    side = "left" if strict else "right"
    idx = np.searchsorted(pts, x, side=side)
    out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    return np.minimum(out, 1.0) if np.ndim(out) else float(min(out, 1.0))


class _Finite(ScalarDist):
    """Shared behaviour for laws with finitely many atoms."""

    discrete = True

    def cf(self, t):
        pts, pr = self.atoms()
        ta = _as_array(t)
        val = np.exp(1j * np.multiply.outer(ta, pts)) @ pr
        return _ret(val, t)

    def mean(self):
        pts, pr = self.atoms()
        return math.fsum(pts * pr)

    def entropy(self):
        _, pr = self.atoms()
        pr = pr[pr > 0]
        return -math.fsum(pr * np.log(pr))

    def support(self):
        pts, pr = self.atoms()
        pts = pts[pr > 0]
        return float(pts.min()), float(pts.max())

    def _draw(self, rng, n):
        pts, pr = self.atoms()
        return rng.choice(pts, size=n, p=pr / pr.sum())

    def cdf(self, x):
        return _finite_cdf(*self.atoms(), x, strict=False)

    def cdf_left(self, x):
        return _finite_cdf(*self.atoms(), x, strict=True)


@_register
@dataclass(frozen=True)
class Uniform(ScalarDist):
    lo: float
    hi: float
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not self.hi > self.lo:
            raise DistError("need hi > lo")

    def cf(self, t):
        ta = _as_array(t)
        w = self.hi - self.lo
        val = np.exp(0.5j * ta * (self.lo + self.hi)) * np.sinc(ta * w / (2 * math.pi))
        return _ret(val, t)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def entropy(self):
        return math.log(self.hi - self.lo)

    def support(self):
        return (self.lo, self.hi)

    def _draw(self, rng, n):
        return rng.uniform(self.lo, self.hi, n)

    def cdf(self, x):
        return np.clip((_as_array(x) - self.lo) / (self.hi - self.lo), 0.0, 1.0)


@_register
@dataclass(frozen=True)
class DiscreteUniformSpaced(_Finite):
    """Uniform on {offset + j * spacing : j = 0..count-1}."""
    offset: float
    spacing: float
    count: int
    kind: ClassVar[str] = "discrete_uniform"

    def __post_init__(self):
        if not self.spacing > 0 or int(self.count) != self.count or self.count < 1:
            raise DistError("need spacing > 0 and integer count >= 1")

    def atoms(self):
        j = np.arange(self.count)
        return self.offset + j * self.spacing, np.full(self.count, 1.0 / self.count)

    def mean(self):
        return self.offset + 0.5 * (self.count - 1) * self.spacing

    def entropy(self):
        return math.log(self.count)


@_register
@dataclass(frozen=True)
class Exponential(ScalarDist):
    rate: float
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise DistError("rate must be positive")

    def cf(self, t):
        ta = _as_array(t)
        return _ret(self.rate / (self.rate - 1j * ta), t)

    def mean(self):
        return 1.0 / self.rate

    def entropy(self):
        return 1.0 - math.log(self.rate)

    def support(self):
        return (0.0, math.inf)

    def _draw(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)

    def cdf(self, x):
        x = _as_array(x)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)


def _cexpm1(x, y):
    """expm1(x + iy) without cancellation for small |x + iy|."""
    return np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2 + 1j * np.exp(x) * np.sin(y)


@_register
@dataclass(frozen=True)
class TruncExp(ScalarDist):
    """Density rate * e^{-rate u} / (1 - e^{-rate width}) on [0, width]."""
    width: float
    rate: float
    kind: ClassVar[str] = "trunc_exp"

    def __post_init__(self):
        if not (self.width > 0 and self.rate > 0):
            raise DistError("width and rate must be positive")

    def cf(self, t):
        ta = _as_array(t)
        c, lam = self.width, self.rate
        num = _cexpm1(-lam * c, ta * c)
        val = lam * num / ((1j * ta - lam) * -math.expm1(-lam * c))
        return _ret(val, t)

    def mean(self):
        return maxent.f(self.width, self.rate)

    def entropy(self):
        return maxent.h(self.width, self.rate)

    def support(self):
        return (0.0, self.width)

    def _draw(self, rng, n):
        u = rng.random(n)
        return -np.log1p(u * math.expm1(-self.rate * self.width)) / self.rate

    def cdf(self, x):
        x = np.clip(_as_array(x), 0.0, self.width)
        return np.expm1(-self.rate * x) / math.expm1(-self.rate * self.width)


@_register
@dataclass(frozen=True)
class Geometric(ScalarDist):
    """pmf p (1-p)^k at the points k * spacing, k = 0, 1, 2, ..."""
    success: float
    spacing: float = 1.0
    kind: ClassVar[str] = "geometric"
    discrete: ClassVar[bool] = True

    def __post_init__(self):
        if not 0 < self.success < 1 or not self.spacing > 0:
            raise DistError("need 0 < success < 1 and spacing > 0")

    def cf(self, t):
        ta = _as_array(t)
        p = self.success
        return _ret(p / (1 - (1 - p) * np.exp(1j * ta * self.spacing)), t)

    def mean(self):
        p = self.success
        return self.spacing * (1 - p) / p

    def entropy(self):
        p = self.success
        return -(p * math.log(p) + (1 - p) * math.log1p(-p)) / p

    def support(self):
        return (0.0, math.inf)

    def _draw(self, rng, n):
        return (rng.geometric(self.success, n) - 1) * self.spacing

    def _count_cdf(self, k):
        # P(K <= k) for integer k >= 0
        return -np.expm1((k + 1) * math.log1p(-self.success))

    def cdf(self, x):
        x = _as_array(x)
        k = np.floor(np.maximum(x, 0.0) / self.spacing + 1e-12)
        return np.where(x >= 0, self._count_cdf(k), 0.0)

    def cdf_left(self, x):
        x = _as_array(x)
        k = np.ceil(np.maximum(x, 0.0) / self.spacing - 1e-12) - 1
        return np.where(x > 0, self._count_cdf(k), 0.0)


@_register
@dataclass(frozen=True)
class TruncGeomSpaced(_Finite):
    """pmf proportional to (1-success)^j on {j * spacing : j = 0..count-1}.

    success = 0 is the discrete uniform limit.
    """
    success: float
    spacing: float
    count: int
    kind: ClassVar[str] = "trunc_geometric"

    def __post_init__(self):
        if not 0 <= self.success < 1 or not self.spacing > 0 or self.count < 1:
            raise DistError("need 0 <= success < 1, spacing > 0, count >= 1")

    def atoms(self):
        j = np.arange(self.count)
        w = np.exp(j * math.log1p(-self.success))
        return j * self.spacing, w / w.sum()

    def mean(self):
        return self.spacing * maxent.tg_mean(self.success, self.count)

    def entropy(self):
        return maxent.tg_entropy(self.success, self.count)


@_register
@dataclass(frozen=True)
class AtomPlusExponential(ScalarDist):
    """atom_weight * delta_0 + (1 - atom_weight) * Exponential(rate)."""
    atom_weight: float
    rate: float
    kind: ClassVar[str] = "atom_exponential"

    def __post_init__(self):
        if not 0 <= self.atom_weight <= 1 or not self.rate > 0:
            raise DistError("need atom_weight in [0, 1] and rate > 0")

    def cf(self, t):
        ta = _as_array(t)
        w = self.atom_weight
        return _ret(w + (1 - w) * self.rate / (self.rate - 1j * ta), t)

    def mean(self):
        return (1 - self.atom_weight) / self.rate

    def entropy(self):
        if self.atom_weight == 1:
            return 0.0
        if self.atom_weight == 0:
            return 1.0 - math.log(self.rate)
        raise MixedDistribution("entropy undefined for an atom plus a density")

    def support(self):
        return (0.0, math.inf)

    def _draw(self, rng, n):
        cont = rng.exponential(1.0 / self.rate, n)
        return np.where(rng.random(n) < self.atom_weight, 0.0, cont)

    def cdf(self, x):
        x = _as_array(x)
        w = self.atom_weight
        return np.where(x >= 0, w + (1 - w) * -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def cdf_left(self, x):
        x = _as_array(x)
        w = self.atom_weight
        return np.where(x > 0, w + (1 - w) * -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)


@_register
@dataclass(frozen=True)
class AtomPlusGeometric(ScalarDist):
    """atom_weight * delta_0 + (1 - atom_weight) * Geometric(success, spacing)."""
    atom_weight: float
    success: float
    spacing: float = 1.0
    kind: ClassVar[str] = "atom_geometric"
    discrete: ClassVar[bool] = True

    def __post_init__(self):
        if not 0 <= self.atom_weight <= 1 or not 0 < self.success < 1 or not self.spacing > 0:
            raise DistError("need atom_weight in [0, 1], 0 < success < 1, spacing > 0")

    @property
    def _geo(self):
        return Geometric(self.success, self.spacing)

    def cf(self, t):
        w = self.atom_weight
        return w + (1 - w) * self._geo.cf(t)

    def mean(self):
        return (1 - self.atom_weight) * self._geo.mean()

    def entropy(self):
        w, p = self.atom_weight, self.success
        q = 1 - p
        p0 = w + (1 - w) * p
        c = (1 - w) * p
        out = -p0 * math.log(p0) if p0 > 0 else 0.0
        if c > 0:
            # sum_{k>=1} c q^k log(c q^k)
            out -= c * math.log(c) * q / p + c * math.log(q) * q / (p * p)
        return out

    def support(self):
        return (0.0, 0.0) if self.atom_weight == 1 else (0.0, math.inf)

    def _draw(self, rng, n):
        geo = self._geo._draw(rng, n)
        return np.where(rng.random(n) < self.atom_weight, 0.0, geo)

    def cdf(self, x):
        w = self.atom_weight
        return np.where(_as_array(x) >= 0, w + (1 - w) * self._geo.cdf(x), 0.0)

    def cdf_left(self, x):
        w = self.atom_weight
        return np.where(_as_array(x) > 0, w + (1 - w) * self._geo.cdf_left(x), 0.0)


@_register
@dataclass(frozen=True)
class BernoulliSeries(ScalarDist):
    """Law of sum_j value_j * B_j with independent B_j ~ Bernoulli(prob_j).

    The stored terms are a truncation of an infinite series; `tail_eps`
    bounds the mean of everything left out. Because the omitted part is a
    nonnegative variable with mean at most tail_eps, the characteristic
    function of the stored part is within min(2, |t| tail_eps) of the full one.
    """
    terms: tuple[tuple[float, float], ...]
    tail_eps: float = 0.0
    kind: ClassVar[str] = "bernoulli_series"

    def __post_init__(self):
        for v, p in self.terms:
            if not 0 <= p <= 1:
                raise DistError(f"probability {p} outside [0, 1]")
        if self.tail_eps < 0:
            raise DistError("tail_eps must be nonnegative")

    @property
    def values(self):
        return np.array([v for v, _ in self.terms], dtype=float)

    @property
    def probs(self):
        return np.array([p for _, p in self.terms], dtype=float)

    def cf(self, t):
        ta = _as_array(t)
        v, p = self.values, self.probs
        if v.size == 0:
            return _ret(np.ones_like(ta, dtype=complex), t)
        fac = 1 - p + p * np.exp(1j * np.multiply.outer(ta, v))
        return _ret(np.prod(fac, axis=-1), t)

    def cf_error_bound(self, t):
        return np.minimum(2.0, np.abs(_as_array(t)) * self.tail_eps)

    def mean(self):
        return math.fsum(self.values * self.probs)

    def entropy(self):
        raise UnsupportedOperation("entropy of a Bernoulli series is not computed (generally singular)")

    def support(self):
        v = self.values
        return float(v[v < 0].sum()), float(v[v > 0].sum()) + self.tail_eps

    def _draw(self, rng, n):
        v, p = self.values, self.probs
        out = np.zeros(n)
        chunk = max(1, 2_000_000 // max(v.size, 1))
        for s in range(0, n, chunk):
            m = min(chunk, n - s)
            out[s:s + m] = (rng.random((m, v.size)) < p) @ v
        return out

    def cdf(self, x):
        raise UnsupportedOperation("no closed-form CDF for a Bernoulli series")


@_register
@dataclass(frozen=True)
class FiniteDiscrete(_Finite):
    atoms_: tuple[tuple[float, float], ...]
    kind: ClassVar[str] = "finite_discrete"

    def __init__(self, atoms):
        object.__setattr__(self, "atoms_", tuple((float(a), float(p)) for a, p in atoms))
        self.__post_init__()

    def __post_init__(self):
        if not self.atoms_:
            raise DistError("need at least one atom")
        pr = [p for _, p in self.atoms_]
        if any(not 0 <= p <= 1 for p in pr):
            raise DistError("probabilities must lie in [0, 1]")
        if abs(math.fsum(pr) - 1.0) > PROB_SUM_TOL:
            raise DistError("probabilities must sum to 1")

    def atoms(self):
        a = np.array(self.atoms_, dtype=float)
        return a[:, 0], a[:, 1]

    def to_dict(self):
        return {"kind": self.kind, "atoms": [list(a) for a in self.atoms_]}


@dataclass(frozen=True)
class GaussianNoise:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DistError("sigma must be positive")

    def snr(self) -> float:
        return 1.0 / self.sigma

    def entropy(self) -> float:
        return 0.5 * math.log(2 * math.pi * math.e * self.sigma ** 2)


def cf_eval(d: ScalarDist, t):
    return d.cf(t)


def mean(d: ScalarDist) -> float:
    return d.mean()


def entropy(d: ScalarDist) -> float:
    return d.entropy()


def sample(d: ScalarDist, seed: int, n: int) -> np.ndarray:
    return d.sample(seed, n)


def ks_statistic(samples, d: ScalarDist) -> float:
    """sup_x |F_n(x) - F(x)|, exact for continuous, discrete and mixed F."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    u, counts = np.unique(x, return_counts=True)
    cum = np.cumsum(counts) / n
    prev = np.concatenate([[0.0], cum[:-1]])
    right = np.abs(cum - np.asarray(d.cdf(u), float))
    left = np.abs(prev - np.asarray(d.cdf_left(u), float))
    return float(max(right.max(), left.max()))


def ks_critical(n: int, level_coef: float = KS_CRIT_1PCT) -> float:
    return level_coef / math.sqrt(n)
