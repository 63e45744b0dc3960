"""Constructive splits of maximum-entropy laws into independent summands.

Each ``decompose_*`` function returns a :class:`Split`: the two factors, the
target law they should add up to, and the support/mean claims the
construction makes. ``verify_decomposition`` turns a split into a
:class:`DecompositionReport` by checking characteristic functions on a fixed
grid, mean additivity, exact convolution (finite discrete factors) and the
claims.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np

from .dists import (AtomPlusExponential, AtomPlusGeometric, BernoulliSeries,
                    DiscreteUniformSpaced, Exponential, Geometric, ScalarDist,
                    TruncExp, TruncGeomSpaced, Uniform, ks_critical, ks_statistic)

T_GRID = np.linspace(-50.0, 50.0, 2001)
DEFAULT_J = 60
MAX_PICKS = 10_000
CF_FLOOR = 1e-12  # float round-off allowance on top of any truncation bound


class DecompError(ValueError):
    pass


class ConditionViolated(DecompError):
    pass


class TargetOutOfRange(DecompError):
    pass


class DivisibilityViolated(DecompError):
    pass


class ParameterOrderViolated(DecompError):
    pass


# ---------------------------------------------------------------- subsums

@dataclass(frozen=True)
class IndexSet:
    indices: tuple[int, ...]
    achieved_sum: float
    target: float
    residual: float
    achieved_exact: Fraction = field(repr=False, compare=False, default=Fraction(0))
    capped: bool = False

    def to_dict(self):
        return {"indices": list(self.indices), "achieved_sum": self.achieved_sum,
                "target": self.target, "residual": self.residual, "capped": self.capped}


def subsum_condition_margins(terms: Sequence[float], tail: float = 0.0) -> np.ndarray:
    """r_n - a_n for every stored n, where r_n includes the bound `tail` on
    everything beyond the stored terms."""
    a = np.asarray(terms, dtype=float)
    r = np.concatenate([np.cumsum(a[::-1])[::-1][1:], [0.0]]) + tail
    return r - a


def subsum_greedy(terms: Sequence[float], target, *, tail: float = 0.0,
                  check: bool = True, max_picks: int = MAX_PICKS) -> IndexSet:
    """Greedy subsum of a strictly decreasing positive sequence.

    Scans indices in order and takes index j whenever the running sum plus
    a_j does not exceed the target -- the smallest admissible next index,
    exactly as in the interval-of-subsums argument. Sums are compared in
    exact rational arithmetic on the stored floats, so the selection is
    reproducible and rerunning on ``achieved_exact`` returns the same set.

    `tail` bounds the sum of the terms beyond those stored.
    """
    a = [float(x) for x in terms]
    if any(x <= 0 for x in a) or any(a[i] <= a[i + 1] for i in range(len(a) - 1)):
        raise ConditionViolated("terms must be positive and strictly decreasing")
    if check:
        margins = subsum_condition_margins(a, tail)
        slack = 8 * np.finfo(float).eps * (np.asarray(a) + 1e-300)
        bad = np.nonzero(margins < -slack)[0]
        if bad.size:
            n = int(bad[0])
            raise ConditionViolated(f"a_{n} = {a[n]:.6g} exceeds its remainder")
    y = Fraction(target)
    total = sum(map(Fraction, a), Fraction(0)) + Fraction(tail)
    if y < 0 or y > total:
        raise TargetOutOfRange(f"target {float(y)} outside [0, {float(total)}]")
    picked: list[int] = []
    acc = Fraction(0)
    for j, aj in enumerate(a):
        if len(picked) >= max_picks:
            break
        fa = Fraction(aj)
        if acc + fa <= y:
            acc += fa
            picked.append(j)
            if acc == y:
                break
    return IndexSet(tuple(picked), float(acc), float(y), float(abs(y - acc)), acc,
                    capped=len(picked) >= max_picks)


# ---------------------------------------------------------------- splits

@dataclass(frozen=True)
class Claim:
    """A property a construction promises about one factor."""
    name: str
    factor: int          # 1 or 2
    kind: str            # "support" or "mean_le"
    lo: float = 0.0
    hi: float = math.inf


@dataclass(frozen=True)
class Split:
    name: str
    target: ScalarDist
    u1: ScalarDist
    u2: ScalarDist
    claims: tuple[Claim, ...] = ()
    index_set: IndexSet | None = None
    mean_tol: float = 1e-9

    def __iter__(self):
        if self.index_set is not None:
            return iter((self.index_set, self.u1, self.u2))
        return iter((self.u1, self.u2))


def _digits(a) -> tuple[list[int], bool]:
    """Positions j >= 1 of the binary digits of a in (0,1) that equal one.

    Floats are dyadic, so their expansion terminates; other rationals are
    expanded to DEFAULT_J digits. Returns (positions, terminated).
    """
    x = Fraction(a)
    out = []
    for j in range(1, 2000):
        if x == 0:
            return out, True
        x *= 2
        if x >= 1:
            out.append(j)
            x -= 1
        if j >= DEFAULT_J and x.denominator & (x.denominator - 1):
            return out, False
    return out, x == 0


def _check_unit(a):
    if not 0 < a < 1:
        raise TargetOutOfRange(f"a must lie in (0, 1), got {a}")


def decompose_uniform_binary(a) -> Split:
    """Uniform[0,1] = U1 + U2 by splitting the binary digits between users.

    U1 carries the digit positions of a (fair coin weights 2^-j), U2 the rest.
    """
    _check_unit(a)
    ones, exact = _digits(a)
    last = max(ones) if ones else 0
    J = max(DEFAULT_J, last)
    on = set(ones)
    tail1 = 0.0 if exact else 2.0 ** -J
    u1 = BernoulliSeries(tuple((2.0 ** -j, 0.5) for j in sorted(on)), tail1)
    zeros = [j for j in range(1, last + 1) if j not in on]
    if exact and not zeros:
        # complement is the full tail {j > last}: exactly uniform
        u2: ScalarDist = Uniform(0.0, 2.0 ** -last)
    else:
        rest = [j for j in range(1, J + 1) if j not in on]
        u2 = BernoulliSeries(tuple((2.0 ** -j, 0.5) for j in rest), 2.0 ** -J)
    af = float(a)
    claims = (Claim("support U1 in [0,a]", 1, "support", 0.0, af),
              Claim("support U2 in [0,1-a]", 2, "support", 0.0, 1.0 - af))
    return Split("uniform-binary", Uniform(0.0, 1.0), u1, u2, claims)


def decompose_uniform_contracted(k: int) -> Split:
    if k < 2:
        raise DecompError("k must be at least 2")
    u1 = Uniform(0.0, 1.0 / k)
    u2 = DiscreteUniformSpaced(0.0, 1.0 / k, k)
    claims = (Claim("support U1 in [0,1/k]", 1, "support", 0.0, 1.0 / k),
              Claim("support U2 in [0,1-1/k]", 2, "support", 0.0, 1.0 - 1.0 / k))
    return Split("uniform-contracted", Uniform(0.0, 1.0), u1, u2, claims)


def decompose_exp_verdu(a: float) -> Split:
    _check_unit(a)
    return Split("exp-verdu", Exponential(1.0), Exponential(1.0 / a),
                 AtomPlusExponential(a, 1.0))


def _exp_term(j: int, lam: float = 1.0) -> tuple[float, float]:
    x = lam * 2.0 ** j
    p = math.exp(-x) / (1 + math.exp(-x)) if x > 0 else 0.5
    return 2.0 ** j, p


def exp_series_tail(J: int, lam: float = 1.0) -> float:
    """Upper bound on the mean of the terms |j| > J of the exponential series."""
    neg = 2.0 ** (-J - 1)  # sum_{j < -J} 2^j / 2
    pos = 0.0
    j = J + 1
    while True:
        v, p = _exp_term(j, lam)
        term = v * p
        if lam * v >= 2:
            # consecutive ratio <= 2 e^{-x} <= 2/e^2 from here on
            pos += term / (1 - 2 * math.exp(-lam * v))
            break
        pos += term
        j += 1
    return neg + pos


def exp_binary_series(lam: float = 1.0, J: int = DEFAULT_J) -> BernoulliSeries:
    """Exponential(lam) as sum_j 2^j B_j, P(B_j = 1) = 1/(1 + e^{lam 2^j}), |j| <= J."""
    terms = tuple(_exp_term(j, lam) for j in range(-J, J + 1))
    return BernoulliSeries(terms, exp_series_tail(J, lam))


# Rearrangements of a_j = 2^j / (1 + e^{2^j}) into a single sequence.
#   printed:  b_n = a_0, a_-1, a_1, a_-2, a_2, then a_-(n-2) + a_(n-2) for n >= 5
#   sorted:   the same with n = 1 and n = 2 swapped (a_-1 < a_1)
#   unmerged: every a_j on its own, in decreasing order
# Only "unmerged" satisfies b_n <= r_n everywhere (the merged term b_5 exceeds
# its remainder), so the construction uses it.
_B_HEAD = {
    "printed": {0: (0,), 1: (-1,), 2: (1,), 3: (-2,), 4: (2,)},
    "sorted": {0: (0,), 1: (1,), 2: (-1,), 3: (-2,), 4: (2,)},
}
ORDERS = ("printed", "sorted", "unmerged")


def b_index_map(n: int, order: str = "printed") -> tuple[int, ...]:
    """Integer indices of a_j merged into the rearranged term b_n."""
    head = _B_HEAD[order]
    return head[n] if n in head else (-(n - 2), n - 2)


def _a_float(j: int) -> float:
    v, p = _exp_term(j)
    return v * p


def exp_terms_sorted(J: int = DEFAULT_J) -> list[tuple[int, float]]:
    """(j, a_j) for |j| <= J with a_j > 0 in double precision, decreasing."""
    items = [(j, _a_float(j)) for j in range(-J, J + 1)]
    return sorted((it for it in items if it[1] > 0), key=lambda it: -it[1])


def decompose_exp_binary(a: float, J: int = DEFAULT_J) -> Split:
    """Exponential(1) = U1 + U2 with E[U1] = a.

    The index set is the greedy subsum of the terms a_j sorted in decreasing
    order; U1 collects the Bernoulli digits it selects and U2 the rest.
    """
    _check_unit(a)
    seq = exp_terms_sorted(J)
    tail = exp_series_tail(J)
    chosen = subsum_greedy([v for _, v in seq], a, tail=tail)
    idx = sorted(seq[n][0] for n in chosen.indices)
    iset = IndexSet(tuple(idx), chosen.achieved_sum, chosen.target, chosen.residual,
                    chosen.achieved_exact, chosen.capped)
    inside = set(idx)
    u1 = BernoulliSeries(tuple(_exp_term(j) for j in idx), 0.0)
    u2 = BernoulliSeries(tuple(_exp_term(j) for j in range(-J, J + 1) if j not in inside), tail)
    claims = (Claim("E[U1] <= a", 1, "mean_le", hi=float(a)),)
    return Split("exp-binary", Exponential(1.0), u1, u2, claims, iset)


def _te_term(j: int, lam: float) -> tuple[float, float]:
    x = lam * 2.0 ** -j
    return 2.0 ** -j, math.exp(-x) / (1 + math.exp(-x))


def truncexp_binary_series(lam: float, J: int = DEFAULT_J) -> BernoulliSeries:
    """TruncExp on [0,1] with rate lam as sum_{j>=1} 2^-j B_j, j <= J."""
    return BernoulliSeries(tuple(_te_term(j, lam) for j in range(1, J + 1)), 2.0 ** -J / 2)


def decompose_truncexp_binary(a, lam: float, J: int = DEFAULT_J) -> Split:
    _check_unit(a)
    if not lam > 0:
        raise DecompError("lambda must be positive")
    ones, exact = _digits(a)
    J = max(J, max(ones, default=0))
    on = set(ones)
    tail1 = 0.0 if exact else 2.0 ** -J / 2
    u1 = BernoulliSeries(tuple(_te_term(j, lam) for j in sorted(on)), tail1)
    u2 = BernoulliSeries(tuple(_te_term(j, lam) for j in range(1, J + 1) if j not in on),
                         2.0 ** -J / 2)
    af = float(a)
    claims = (Claim("support U1 in [0,a]", 1, "support", 0.0, af),
              Claim("support U2 in [0,1-a]", 2, "support", 0.0, 1.0 - af),
              Claim("E[U1] <= a/2", 1, "mean_le", hi=af / 2),
              Claim("E[U2] <= (1-a)/2", 2, "mean_le", hi=(1 - af) / 2))
    return Split("truncexp-binary", TruncExp(1.0, lam), u1, u2, claims, mean_tol=1e-6)


def decompose_truncexp_contracted(k: int, lam: float, width: float = 1.0) -> Split:
    if k < 2:
        raise DecompError("k must be at least 2")
    if not lam > 0:
        raise DecompError("lambda must be positive")
    step = width / k
    u1 = TruncExp(step, lam)
    u2 = TruncGeomSpaced(-math.expm1(-lam * step), step, k)
    claims = (Claim("support U1 in [0,c/k]", 1, "support", 0.0, step),
              Claim("support U2 in [0,c-c/k]", 2, "support", 0.0, width - step))
    return Split("truncexp-contracted", TruncExp(width, lam), u1, u2, claims)


def _check_lattice(k1: int, n: int, k: int | None):
    if k1 < 1:
        raise DecompError("k1 must be at least 1")
    if n < 2:
        raise DecompError("n must be at least 2 (n = 1 needs no decomposition)")
    if k is not None and (k + 1) != n * (k1 + 1):
        raise DivisibilityViolated(f"(k+1) = {k + 1} is not n (k1+1) = {n * (k1 + 1)}")


def decompose_discrete_uniform(k1: int, n: int, *, k: int | None = None,
                               spacing: float = 1.0) -> Split:
    _check_lattice(k1, n, k)
    m = k1 + 1
    u1 = DiscreteUniformSpaced(0.0, spacing, m)
    u2 = DiscreteUniformSpaced(0.0, m * spacing, n)
    return Split("discrete-uniform", DiscreteUniformSpaced(0.0, spacing, n * m), u1, u2,
                 (Claim("support U1", 1, "support", 0.0, k1 * spacing),
                  Claim("support U2", 2, "support", 0.0, (n - 1) * m * spacing)))


def decompose_geometric(lam: float, lam1: float, spacing: float = 1.0) -> Split:
    """Geometric(lam) = Geometric(lam1) + [w delta_0 + (1-w) Geometric(lam)], lam < lam1."""
    if not (0 < lam < 1 and 0 < lam1 < 1):
        raise DecompError("parameters must lie in (0, 1)")
    if lam >= lam1:
        raise ParameterOrderViolated(f"need lambda < lambda1, got {lam} >= {lam1}")
    w = (lam / lam1) * (1 - lam1) / (1 - lam)
    return Split("geometric", Geometric(lam, spacing), Geometric(lam1, spacing),
                 AtomPlusGeometric(w, lam, spacing))


def decompose_truncgeom(k1: int, n: int, lam: float, *, k: int | None = None,
                        spacing: float = 1.0) -> Split:
    _check_lattice(k1, n, k)
    if not 0 <= lam < 1:
        raise DecompError("lambda must lie in [0, 1)")
    m = k1 + 1
    u1 = TruncGeomSpaced(lam, spacing, m)
    lam2 = -math.expm1(m * math.log1p(-lam))
    u2 = TruncGeomSpaced(lam2, m * spacing, n)
    return Split("truncgeom", TruncGeomSpaced(lam, spacing, n * m), u1, u2,
                 (Claim("support U1", 1, "support", 0.0, k1 * spacing),
                  Claim("support U2", 2, "support", 0.0, (n - 1) * m * spacing)))


# ---------------------------------------------------------------- verification

@dataclass(frozen=True)
class Check:
    name: str
    satisfied: bool
    margin: float


@dataclass(frozen=True)
class DecompositionReport:
    cf_max_residual: float
    cf_tolerance: float
    mean_sum_residual: float
    constraint_checks: tuple[Check, ...]
    mc_ks: float | None = None
    mc_critical: float | None = None
    target: dict | None = None
    factors: tuple[dict, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.satisfied for c in self.constraint_checks)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "factors": list(self.factors),
            "cf_max_residual": self.cf_max_residual,
            "cf_tolerance": self.cf_tolerance,
            "mean_residual": self.mean_sum_residual,
            "mc_ks": self.mc_ks,
            "checks": [{"name": c.name, "satisfied": c.satisfied, "margin": c.margin}
                       for c in self.constraint_checks],
            "pass": self.passed,
        }


def _cf_bound(d: ScalarDist, t):
    fn = getattr(d, "cf_error_bound", None)
    return fn(t) if fn is not None else np.zeros_like(t)


def exact_convolution_error(target: ScalarDist, u1: ScalarDist, u2: ScalarDist) -> float | None:
    """Largest per-atom pmf difference between u1 * u2 and the target, or None
    when one of the laws is not finitely supported."""
    parts = [d.atoms() for d in (target, u1, u2)]
    if any(p is None for p in parts):
        return None
    (pt, qt), (p1, q1), (p2, q2) = parts
    scale = max(np.abs(pt).max(), 1e-300)
    key = lambda x: round(x / scale, 9)
    conv: dict[float, list[float]] = {}
    for a, qa in zip(p1, q1):
        for b, qb in zip(p2, q2):
            conv.setdefault(key(a + b), []).append(qa * qb)
    want = {}
    for x, q in zip(pt, qt):
        want.setdefault(key(x), []).append(q)
    err = 0.0
    for kx in set(conv) | set(want):
        err = max(err, abs(math.fsum(conv.get(kx, [0.0])) - math.fsum(want.get(kx, [0.0]))))
    return err


def verify_decomposition(target: ScalarDist, u1: ScalarDist, u2: ScalarDist,
                         tol: float = 1e-11, *, claims: Sequence[Claim] = (),
                         mean_tol: float = 1e-9, mc_seed: int | None = None,
                         mc_n: int = 100_000, t_grid=T_GRID) -> DecompositionReport:
    """Certificate that u1 + u2 (independent) has the law of target.

    The CF check passes when |phi - phi1 phi2| <= tol + truncation bound at
    every grid point; truncation bounds come from Bernoulli-series tails.
    """
    t = np.asarray(t_grid, dtype=float)
    resid = np.abs(target.cf(t) - u1.cf(t) * u2.cf(t))
    allowance = _cf_bound(u1, t) + _cf_bound(u2, t) + _cf_bound(target, t)
    excess = float(np.max(resid - allowance))
    checks = [Check("cf factorization", excess <= tol, tol - excess)]

    tails = sum(getattr(d, "tail_eps", 0.0) for d in (u1, u2))
    mres = abs(u1.mean() + u2.mean() - target.mean())
    mtol = mean_tol + tails
    checks.append(Check("mean additivity", mres <= mtol, mtol - mres))

    conv = exact_convolution_error(target, u1, u2)
    if conv is not None:
        checks.append(Check("exact convolution", conv <= 1e-14, 1e-14 - conv))

    factor = {1: u1, 2: u2}
    for c in claims:
        d = factor[c.factor]
        if c.kind == "support":
            lo, hi = d.support()
            slack = 4 * np.finfo(float).eps * max(1.0, abs(c.hi))
            margin = min(lo - c.lo, c.hi - hi)
            checks.append(Check(c.name, margin >= -slack, margin))
        elif c.kind == "mean_le":
            margin = c.hi - d.mean()
            checks.append(Check(c.name, margin >= -1e-15, margin))
        else:  # pragma: no cover
            raise DecompError(f"unknown claim kind {c.kind}")

    ks = crit = None
    if mc_seed is not None:
        x = u1.sample(mc_seed, mc_n) + u2.sample(mc_seed + 1, mc_n)
        ks, crit = ks_statistic(x, target), ks_critical(mc_n)
        checks.append(Check("monte-carlo KS (1%)", ks <= crit, crit - ks))

    return DecompositionReport(float(resid.max()), tol + float(allowance.max()), mres,
                               tuple(checks), ks, crit, target.to_dict(),
                               (u1.to_dict(), u2.to_dict()))


def verify_split(split: Split, tol: float = 1e-11, **kw) -> DecompositionReport:
    kw.setdefault("mean_tol", split.mean_tol)
    return verify_decomposition(split.target, split.u1, split.u2, tol,
                                claims=split.claims, **kw)


# ---------------------------------------------------------------- rearranged series check

@dataclass(frozen=True)
class RearrangementRow:
    n: int
    b: float
    r_lower: float
    margin: float          # r_lower - b
    rel_margin: float      # margin / b
    decreasing: bool       # b_n > b_{n+1}


@dataclass(frozen=True)
class RearrangementReport:
    n_max: int
    order: str
    rows: tuple[RearrangementRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.margin > 0 and r.decreasing for r in self.rows)

    @property
    def failures(self) -> list[str]:
        out = []
        for r in self.rows:
            if not r.decreasing:
                out.append(f"b_{r.n} <= b_{r.n + 1}")
            if not r.margin > 0:
                out.append(f"b_{r.n} > r_{r.n}")
        return out

    @property
    def min_rel_margin(self) -> float:
        return min(r.rel_margin for r in self.rows)

    def to_dict(self):
        return {"n_max": self.n_max, "order": self.order, "pass": self.passed,
                "min_rel_margin": self.min_rel_margin,
                "rows": [r.__dict__ for r in self.rows]}


def _neg_tail_lower(M):
    """sum_{m >= M} a_{-m} >= 2^{-(M-1)} / (1 + e^{2^{-M}})."""
    return mpmath.ldexp(1, -(M - 1)) / (1 + mpmath.exp(mpmath.ldexp(1, -M)))


def check_rearrangement(n_max: int = 200, order: str = "printed") -> RearrangementReport:
    """Check b_n > b_{n+1} and b_n <= r_n for n = 0..n_max in high precision.

    r_n is bounded from below by the stored partial remainder plus an
    analytic lower bound on everything beyond the stored terms (only terms
    a_{-m} enter that bound; dropping the positive-index ones can only
    lower r_n). The relative slack shrinks like 2^{-n}, hence the working
    precision grows with n_max.
    """
    if n_max < 7:
        raise DecompError("n_max must be at least 7")
    if order not in ORDERS:
        raise DecompError(f"order must be one of {ORDERS}")
    with mpmath.workprec(4 * n_max + 64):
        def a(j):
            x = mpmath.ldexp(1, j)
            return x / (1 + mpmath.exp(x))

        if order == "unmerged":
            M = n_max + 40
            pool = [(a(j), j) for j in range(-M, 13)]
            pool.sort(key=lambda vj: -vj[0])
            b = [v for v, _ in pool]
            # everything left out is a_{-m}, m > M, or a positive index > 12,
            # all smaller than a_{-M}
            tail = _neg_tail_lower(M + 1)
        else:
            N = n_max + 30
            b = [sum(a(j) for j in b_index_map(n, order)) for n in range(N + 1)]
            tail = _neg_tail_lower(N - 1)
        r = [mpmath.mpf(0)] * len(b)
        r[-1] = tail
        for n in range(len(b) - 2, -1, -1):
            r[n] = r[n + 1] + b[n + 1]
        rows = []
        for n in range(n_max + 1):
            m = r[n] - b[n]
            rows.append(RearrangementRow(n, float(b[n]), float(r[n]), float(m),
                                     float(m / b[n]), bool(b[n] > b[n + 1])))
    return RearrangementReport(n_max, order, tuple(rows))


def binary_exp_total(tol: float = 1e-14) -> float:
    """sum over all integers j of 2^j / (1 + e^{2^j}), with certified tails."""
    from .numerics import series_sum

    def pos():
        j = 0
        while True:
            v, p = _exp_term(j)
            yield v * p
            j += 1

    def neg():
        j = 1
        while True:
            v, p = _exp_term(-j)
            yield v * p
            j += 1

    # j >= n: sum 2^j e^{-2^j} <= 2 * 2^n e^{-2^n} once 2^n >= 2
    pos_tail = lambda n: 2 * 2.0 ** n * math.exp(-2.0 ** n) if n >= 1 else math.inf
    # j <= -(n+1): sum 2^j / 2 = 2^{-n} / 2
    neg_tail = lambda n: 2.0 ** -n / 2
    return math.fsum([series_sum(pos(), pos_tail, tol=tol / 2),
                      series_sum(neg(), neg_tail, tol=tol / 2)])
