"""Caratheodory-Fejer near-minimax polynomial construction.

Starting from a generous Chebyshev expansion, the dominant eigenpair of the
Hankel matrix of tail coefficients yields a correction that redistributes
the truncation error into a near-equioscillating one. The result is checked
on a dense grid against plain truncation; if the construction does not pay
off (or degenerates), the truncated expansion is returned instead and the
result is flagged experimental.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..ir.attributes import ApproxSpec, StaticPolynomial
from ..ir.types import IrError
from .chebyshev import ChebSeries, chebyshev_coefficients, monomial_if_stable

# Expansion length: enough tail beyond the target degree to resolve the
# dominant Hankel eigenpair, capped to keep the spectral problem small.
_MIN_EXPANSION = 64
_MAX_EXPANSION = 128
_EIG_TOL = 1e-12
_EIG_MAX_ITERS = 10000
# Degrees up to this bound are emitted in the monomial basis; conversion is
# compensated and loses nothing there. Higher degrees stay in the Chebyshev
# basis, which Clenshaw evaluation handles stably.
MONOMIAL_DEGREE_LIMIT = 32
# Accept the corrected polynomial only if it is no worse than truncation
# beyond this slack.
_IMPROVEMENT_SLACK = 1.10


@dataclass(frozen=True)
class CfResult:
    """Outcome of the construction, with its measured dense-grid error."""

    poly: StaticPolynomial
    fallback: bool  # True when plain truncation was returned
    grid_error: float  # sup |f - poly| over the dense check grid
    truncation_error: float  # sup |f - truncated series| over the same grid
    predicted_error: float  # dominant Hankel eigenvalue magnitude (0 if unused)


def _dominant_eigenpair(H: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest-magnitude eigenpair of a symmetric matrix by power iteration.

    The spectrum of a Hankel matrix built from an even or odd function's
    tail comes in exact +/- pairs, where power iteration on H itself stalls.
    Iterating on H@H merges each pair into one dominant eigenvalue lambda^2;
    the signed eigenvector is then extracted as H v +/- |lambda| v, whichever
    survives. Convergence is judged on the residual of the original matrix.
    """
    n = H.shape[0]
    scale = float(np.max(np.sum(np.abs(H), axis=1)))
    if scale == 0.0:
        return 0.0, np.zeros(n)
    B = H @ H
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    best: tuple[float, float, np.ndarray] | None = None  # (residual, lam, u)
    stalled = 0
    for _ in range(_EIG_MAX_ITERS):
        w = B @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        v = w / norm_w
        s = math.sqrt(max(float(v @ (B @ v)), 0.0))
        hv = H @ v
        improved = False
        for candidate in (hv + s * v, hv - s * v):
            norm_c = np.linalg.norm(candidate)
            if norm_c <= 1e-30:
                continue
            u = candidate / norm_c
            lam = float(u @ (H @ u))
            residual = float(np.max(np.abs(H @ u - lam * u)))
            if residual <= _EIG_TOL * scale:
                return lam, u
            if best is None or residual < 0.5 * best[0]:
                improved = True
            if best is None or residual < best[0]:
                best = (residual, lam, u)
        stalled = 0 if improved else stalled + 1
        # An exactly paired +/- spectrum (even/odd functions) leaves a
        # rounding-level residual floor above the strict tolerance; accept
        # once the iteration has demonstrably hit that floor.
        if stalled >= 100 and best is not None and best[0] <= 1e-9 * scale:
            return best[1], best[2]
    raise IrError(
        "power iteration for the Hankel eigenpair failed to converge "
        f"within {_EIG_MAX_ITERS} iterations"
    )


def _grid_error(f: Callable[[float], float], p, interval, points: int = 10000) -> float:
    a, b = interval
    xs = np.linspace(a, b, points)
    return max(abs(float(f(x)) - float(p(x))) for x in xs)


def cf_approximate_info(f: Callable[[float], float], spec: ApproxSpec) -> CfResult:
    """Run the construction and report how it fared against truncation."""
    m = spec.degree
    interval = (float(spec.interval[0]), float(spec.interval[1]))
    K = min(max(2 * m + 20, _MIN_EXPANSION), _MAX_EXPANSION)
    if m >= K:
        raise IrError(f"approximation degree {m} too large (limit {K - 1})")
    series = chebyshev_coefficients(f, K, interval)
    c = series.coeffs
    c_scale = max(max(abs(v) for v in c), 1.0)
    truncated = series.truncated(m)

    def finish(coeffs: tuple[float, ...], fallback: bool, grid_err: float,
               trunc_err: float, predicted: float) -> CfResult:
        mono = (
            monomial_if_stable(coeffs, interval)
            if m <= MONOMIAL_DEGREE_LIMIT
            else None
        )
        if mono is not None:
            poly = StaticPolynomial(mono, interval, "monomial")
        else:
            poly = StaticPolynomial(coeffs, interval, "chebyshev")
        return CfResult(poly, fallback, grid_err, trunc_err, predicted)

    tail = np.asarray(c[m + 1 :])
    if np.max(np.abs(tail)) <= 1e-14 * c_scale:
        # f is (numerically) already a polynomial of degree <= m.
        err = _grid_error(f, truncated, interval)
        return finish(truncated.coeffs, False, err, err, 0.0)

    T = tail.size
    H = np.zeros((T, T))
    for i in range(T):
        H[i, : T - i] = tail[i:]
    lam, u = _dominant_eigenpair(H)

    trunc_err = _grid_error(f, truncated, interval)
    if abs(u[0]) <= 1e-13 * np.max(np.abs(u)):
        # Leading eigenvector component too small to anchor the recurrence.
        return finish(truncated.coeffs, True, trunc_err, trunc_err, abs(lam))

    # Backward recurrence b_k = -(1/u_1) * sum_j u_{j+1} b_{k+j}, seeded with
    # the tail coefficients b_{m+1..K} = c_{m+1..K}, extended down to k = -m.
    u1 = float(u[0])
    uu = u[1:]
    seq = list(tail)
    for _ in range(m, -m - 1, -1):
        head = np.asarray(seq[: T - 1])
        seq.insert(0, -float(uu @ head) / u1)
    # seq[0] is b_{-m}; b_t sits at seq[t + m]
    corrected = tuple(
        float(c[k] - (seq[k + m] + seq[-k + m])) for k in range(m + 1)
    )
    cf_err = _grid_error(f, ChebSeries(corrected, interval), interval)
    if cf_err > _IMPROVEMENT_SLACK * trunc_err:
        return finish(truncated.coeffs, True, trunc_err, trunc_err, abs(lam))
    return finish(corrected, False, cf_err, trunc_err, abs(lam))


def cf_approximate(f: Callable[[float], float], spec: ApproxSpec) -> StaticPolynomial:
    """Near-minimax polynomial of the requested degree on the given interval."""
    return cf_approximate_info(f, spec).poly
