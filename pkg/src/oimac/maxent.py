"""Moments and entropies of truncated exponential and truncated geometric laws.

Everything is built from one kernel,

    B(x) = 1/x - 1/(e^x - 1),

which is the mean of a truncated exponential on [0, 1] with rate x. Then

    f(c, v)          = c * B(c v)                 (mean, TruncExp on [0, c])
    mean of j        = N B(N s) - B(s)            (pmf ~ e^{-s j}, j < N)

with s = -log(1 - p) for a geometric success parameter p.
"""
from __future__ import annotations

import math

import numpy as np

_TAYLOR = 1e-3


class DomainViolation(ValueError):
    pass


def _b(x: float) -> float:
    if x < _TAYLOR:
        x2 = x * x
        return 0.5 - x / 12.0 + x * x2 / 720.0
    # 1/(e^x - 1) written so large x cannot overflow
    return 1.0 / x - math.exp(-x) / -math.expm1(-x)


def _log_shape(x: float) -> float:
    """log((1 - e^{-x}) / x)."""
    if x < _TAYLOR:
        x2 = x * x
        return -0.5 * x + x2 / 24.0 - x2 * x2 / 2880.0
    return math.log(-math.expm1(-x) / x)


def _check(c: float, v: float) -> None:
    if not c > 0:
        raise DomainViolation(f"c must be positive, got {c}")
    if not v >= 0:
        raise DomainViolation(f"v must be nonnegative, got {v}")


def f(c: float, v: float) -> float:
    """Mean of the truncated exponential on [0, c] with rate v (v = 0: uniform)."""
    _check(c, v)
    return c * _b(c * v)


def g(c: float, v: float, m: float) -> float:
    """f(c, v) - f(c/m, v): mean of the lattice factor when [0, c] is split m ways."""
    if not m > 0:
        raise DomainViolation(f"m must be positive, got {m}")
    return f(c, v) - f(c / m, v)


def h(c: float, v: float) -> float:
    """Differential entropy (nats) of the truncated exponential on [0, c], rate v."""
    _check(c, v)
    x = c * v
    if x < _TAYLOR:
        x2 = x * x
        return math.log(c) - x2 / 24.0 + x2 * x2 / 960.0
    return x * _b(x) + math.log(c) + _log_shape(x)


def geom_rate(p: float) -> float:
    """s = -log(1 - p), the exponential rate of a geometric pmf p (1-p)^j."""
    if not 0 <= p < 1:
        raise DomainViolation(f"geometric parameter must lie in [0, 1), got {p}")
    return -math.log1p(-p)


def tg_mean(p: float, n: int) -> float:
    """Mean index of the n-point truncated geometric pmf ~ (1-p)^j, j = 0..n-1."""
    if n < 1:
        raise DomainViolation("need at least one point")
    s = geom_rate(p)
    return n * _b(n * s) - _b(s)


def tg_entropy(p: float, n: int) -> float:
    """Shannon entropy (nats) of the same pmf."""
    if n < 1:
        raise DomainViolation("need at least one point")
    s = geom_rate(p)
    if s == 0.0:
        return math.log(n)
    # log(S/p) with S = 1 - (1-p)^n, then + s * mean
    log_ratio = math.log(n) + _log_shape(n * s) - _log_shape(s)
    return log_ratio + s * tg_mean(p, n)


def tg_mean_rate(s: float, n: int) -> float:
    """tg_mean parameterised directly by the rate s >= 0."""
    return n * _b(n * s) - _b(s)


def tg_entropy_rate(s: float, n: int) -> float:
    if s == 0.0:
        return math.log(n)
    return math.log(n) + _log_shape(n * s) - _log_shape(s) + s * tg_mean_rate(s, n)


# Array versions of the kernels, used by the vectorised bound objectives.

def b_kernel(x):
    """B(x) elementwise for x >= 0."""
    x = np.asarray(x, dtype=float)
    small = x < _TAYLOR
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        big = 1.0 / xs - np.exp(-xs) / -np.expm1(-xs)
    return np.where(small, 0.5 - x / 12.0 + x ** 3 / 720.0, big)


def log_shape(x):
    """log((1 - e^{-x}) / x) elementwise for x >= 0."""
    x = np.asarray(x, dtype=float)
    small = x < _TAYLOR
    xs = np.where(small, 1.0, x)
    big = np.log(-np.expm1(-xs) / xs)
    return np.where(small, -0.5 * x + x ** 2 / 24.0 - x ** 4 / 2880.0, big)


def tg_mean_rate_v(s, n):
    """tg_mean_rate for arrays of rates s >= 0 and point counts n."""
    s = np.asarray(s, dtype=float)
    n = np.asarray(n, dtype=float)
    return n * b_kernel(n * s) - b_kernel(s)


def tg_entropy_rate_v(s, n):
    s = np.asarray(s, dtype=float)
    n = np.asarray(n, dtype=float)
    return np.log(n) + log_shape(n * s) - log_shape(s) + s * tg_mean_rate_v(s, n)


def tg_mean_v(t, n):
    """tg_mean for arrays of success parameters t in [0, 1)."""
    return tg_mean_rate_v(-np.log1p(-np.asarray(t, dtype=float)), n)


def tg_entropy_v(t, n):
    return tg_entropy_rate_v(-np.log1p(-np.asarray(t, dtype=float)), n)
