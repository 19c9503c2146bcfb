"""Chebyshev interpolation and basis conversion.

Coefficients are recovered from samples at the Chebyshev extreme points via
the discrete cosine-transform relations, so the degree-K series interpolates
the function exactly at those K+1 points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from ..ir.types import IrError


@dataclass(frozen=True)
class ChebSeries:
    """Truncated Chebyshev expansion sum_k coeffs[k] * T_k on an interval."""

    coeffs: tuple[float, ...]
    interval: tuple[float, float]

    def __post_init__(self):
        if not self.coeffs:
            raise IrError("Chebyshev series needs at least one coefficient")
        if not self.interval[0] < self.interval[1]:
            raise IrError("Chebyshev series interval must satisfy a < b")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        a, b = self.interval
        t = (2.0 * x - (a + b)) / (b - a)
        # Clenshaw recurrence
        b1 = b2 = 0.0
        for c in reversed(self.coeffs[1:]):
            b1, b2 = 2.0 * t * b1 - b2 + c, b1
        return t * b1 - b2 + self.coeffs[0]

    def truncated(self, degree: int) -> "ChebSeries":
        if degree < 0:
            raise IrError("cannot truncate a series below degree 0")
        return ChebSeries(self.coeffs[: degree + 1], self.interval)


def chebyshev_points(count: int, interval: tuple[float, float]) -> list[float]:
    """The `count` extreme points cos(pi*j/(count-1)) mapped onto the interval."""
    if count < 2:
        raise IrError("need at least two Chebyshev points")
    a, b = interval
    pts = []
    for j in range(count):
        t = math.cos(math.pi * j / (count - 1))
        pts.append(0.5 * (a + b) + 0.5 * (b - a) * t)
    return pts


def chebyshev_coefficients(
    f: Callable[[float], float], degree: int, interval: tuple[float, float]
) -> ChebSeries:
    """Degree-`degree` Chebyshev interpolant of f through its extreme points."""
    if degree < 1:
        raise IrError("Chebyshev interpolation needs degree >= 1")
    if not interval[0] < interval[1]:
        raise IrError("interval must satisfy a < b")
    K = degree
    xs = chebyshev_points(K + 1, interval)
    fs = np.empty(K + 1)
    for j, x in enumerate(xs):
        v = float(f(x))
        if not math.isfinite(v):
            raise IrError(f"function returned a non-finite value at x = {x!r}")
        fs[j] = v
    # Cosine-transform recovery: c_k = (2/K) * sum'' f(x_j) cos(pi*j*k/K),
    # where '' halves the j = 0 and j = K terms; c_0 and c_K are halved again.
    j = np.arange(K + 1)
    weights = np.ones(K + 1)
    weights[0] = weights[K] = 0.5
    angles = np.pi * np.outer(j, j) / K
    c = (2.0 / K) * (np.cos(angles) @ (weights * fs))
    c[0] *= 0.5
    c[K] *= 0.5
    return ChebSeries(tuple(float(v) for v in c), (float(interval[0]), float(interval[1])))


def chebyshev_to_monomial(
    coeffs: tuple[float, ...], interval: tuple[float, float]
) -> tuple[float, ...]:
    """Expand sum c_k T_k((2x - a - b)/(b - a)) into powers of x.

    The mapped Chebyshev polynomials cancel heavily in the power basis, so
    the expansion is accumulated in exact rational arithmetic (all inputs
    are dyadic floats) and rounded once per output coefficient.
    """
    a, b = interval
    alpha = Fraction(2) / (Fraction(b) - Fraction(a))
    beta = -(Fraction(a) + Fraction(b)) / (Fraction(b) - Fraction(a))
    deg = len(coeffs) - 1
    # T_k in powers of x, built by T_{k+1} = 2*(alpha*x + beta)*T_k - T_{k-1}
    rows: list[list[Fraction]] = [[Fraction(1)]]
    if deg >= 1:
        rows.append([beta, alpha])
    for _ in range(2, deg + 1):
        prev, last = rows[-2], rows[-1]
        nxt = [Fraction(0)] * (len(last) + 1)
        for p, v in enumerate(last):
            nxt[p] += 2 * beta * v
            nxt[p + 1] += 2 * alpha * v
        for p, v in enumerate(prev):
            nxt[p] -= v
        rows.append(nxt)
    out = []
    for p in range(deg + 1):
        total = sum(
            (Fraction(c) * row[p] for c, row in zip(coeffs, rows) if p < len(row)),
            Fraction(0),
        )
        out.append(float(total))
    return tuple(out)


def monomial_if_stable(
    coeffs: tuple[float, ...],
    interval: tuple[float, float],
    amplification_limit: float = 1e4,
) -> tuple[float, ...] | None:
    """Monomial form of a Chebyshev series, or None when ill-conditioned.

    Power-basis evaluation loses roughly eps * sum |c_p| * z^p (z the largest
    |x| on the interval) to cancellation; when that amplification exceeds the
    limit relative to the series' own scale, callers should keep the
    Chebyshev form and evaluate it by Clenshaw-style recurrences instead.
    """
    mono = chebyshev_to_monomial(coeffs, interval)
    z = max(abs(interval[0]), abs(interval[1]))
    amplification = sum(abs(c) * z**p for p, c in enumerate(mono))
    scale = max(sum(abs(c) for c in coeffs), 1.0)
    if amplification <= amplification_limit * scale:
        return mono
    return None
