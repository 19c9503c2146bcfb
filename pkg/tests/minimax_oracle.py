"""Independent minimax reference: dense-grid Remez exchange.

Computes the best uniform polynomial approximation of a function on an
interval, discretised on a dense grid. This is deliberately a separate,
direct implementation (linear solves on an alternating reference set plus
multi-point exchange) so it can serve as an oracle for the
Caratheodory-Fejer construction in the main package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def cheb_vandermonde(t: np.ndarray, degree: int) -> np.ndarray:
    """Matrix whose columns are T_0(t) .. T_degree(t) for t in [-1, 1]."""
    t = np.asarray(t, dtype=float)
    V = np.empty((t.size, degree + 1))
    V[:, 0] = 1.0
    if degree >= 1:
        V[:, 1] = t
    for k in range(2, degree + 1):
        V[:, k] = 2.0 * t * V[:, k - 1] - V[:, k - 2]
    return V


@dataclass
class MinimaxResult:
    """Best approximation found by the exchange iteration."""

    coeffs: np.ndarray  # Chebyshev-basis coefficients in the mapped variable
    interval: tuple[float, float]
    level: float  # |h| from the last levelled solve
    error: float  # sup-norm of the residual over the dense grid

    def __call__(self, x):
        a, b = self.interval
        t = np.asarray(2.0 * (np.asarray(x, dtype=float) - a) / (b - a) - 1.0)
        vals = cheb_vandermonde(np.atleast_1d(t), len(self.coeffs) - 1) @ self.coeffs
        return vals if t.ndim else float(vals[0])


def _strictly_increasing(idx: np.ndarray, limit: int) -> np.ndarray:
    idx = idx.copy()
    for i in range(1, idx.size):
        if idx[i] <= idx[i - 1]:
            idx[i] = idx[i - 1] + 1
    for i in range(idx.size - 2, -1, -1):
        if idx[i] >= idx[i + 1]:
            idx[i] = idx[i + 1] - 1
    if idx[0] < 0 or idx[-1] >= limit:
        raise ValueError("reference set does not fit on the grid")
    return idx


def _alternating_extrema(resid: np.ndarray, want: int) -> np.ndarray | None:
    """Pick one peak of |resid| per sign run; trim the ends down to `want`."""
    signs = np.sign(resid)
    # attach zeros to the previous run so runs stay sign-alternating
    for i in range(signs.size):
        if signs[i] == 0:
            signs[i] = signs[i - 1] if i else 1.0
    boundaries = np.flatnonzero(signs[1:] != signs[:-1]) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [signs.size]))
    peaks = [s + int(np.argmax(np.abs(resid[s:e]))) for s, e in zip(starts, ends)]
    if len(peaks) < want:
        return None
    while len(peaks) > want:
        # drop the weaker end point; alternation is preserved
        if abs(resid[peaks[0]]) <= abs(resid[peaks[-1]]):
            peaks.pop(0)
        else:
            peaks.pop()
    return np.asarray(peaks)


def best_approximation(
    f,
    degree: int,
    interval: tuple[float, float] = (-1.0, 1.0),
    grid: int = 10001,
    max_iters: int = 200,
) -> MinimaxResult:
    """Dense-grid Remez exchange for the best degree-`degree` polynomial."""
    a, b = interval
    xs = np.linspace(a, b, grid)
    ts = 2.0 * (xs - a) / (b - a) - 1.0
    fs = np.asarray([float(f(x)) for x in xs])
    if not np.all(np.isfinite(fs)):
        raise ValueError("function returned a non-finite value on the grid")

    n_ref = degree + 2
    ext = np.cos(np.pi * np.arange(n_ref - 1, -1, -1) / (n_ref - 1))
    idx = _strictly_increasing(
        np.searchsorted(ts, ext).clip(0, grid - 1).astype(int), grid
    )

    big_v = cheb_vandermonde(ts, degree)
    best: MinimaxResult | None = None
    for _ in range(max_iters):
        V = cheb_vandermonde(ts[idx], degree)
        signs = np.power(-1.0, np.arange(n_ref))
        sol = np.linalg.solve(np.column_stack([V, signs]), fs[idx])
        coeffs, h = sol[:-1], float(sol[-1])
        resid = fs - big_v @ coeffs
        sup = float(np.max(np.abs(resid)))
        if best is None or sup < best.error:
            best = MinimaxResult(coeffs, (a, b), abs(h), sup)
        if sup - abs(h) <= 1e-12 * max(1.0, sup):
            break
        new_idx = _alternating_extrema(resid, n_ref)
        if new_idx is None or np.array_equal(new_idx, idx):
            break
        idx = new_idx
    assert best is not None
    return best


def minimax_error(
    f, degree: int, interval: tuple[float, float] = (-1.0, 1.0), grid: int = 10001
) -> float:
    return best_approximation(f, degree, interval, grid).error
