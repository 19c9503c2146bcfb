"""Negacyclic number-theoretic transform over Z_q[X]/(X^N + 1).

The transform twists coefficients by powers of a primitive 2N-th root psi
and then runs a cyclic FFT on psi^2, so index k of the forward output holds
the evaluation of the polynomial at psi^(2k+1).  Multiplying pointwise in
that domain therefore realizes negacyclic convolution exactly.

Butterflies are vectorized with numpy per stage; all modular products go
through the exact `mulmod` kernel, so any prime q < 2^60 with q = 1 mod 2N
works.
"""
from __future__ import annotations

import numpy as np

from ..ir.types import IrError
from .modmath import U64, addmod, is_prime, modinv, mulmod, root_of_unity, submod

__all__ = ["NttContext", "get_context", "negacyclic_mul"]


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.uint64)
    out = np.zeros(n, dtype=np.uint64)
    for _ in range(bits):
        out = (out << np.uint64(1)) | (idx & np.uint64(1))
        idx >>= np.uint64(1)
    return out.astype(np.int64)


def _powers(base: int, count: int, q: int) -> np.ndarray:
    out = np.empty(count, dtype=U64)
    acc = 1
    for i in range(count):
        out[i] = acc
        acc = (acc * base) % q
    return out


class NttContext:
    """Precomputed tables for one (ring degree, modulus) pair."""

    def __init__(self, n: int, q: int):
        if n < 2 or n & (n - 1):
            raise IrError(f"ring degree {n} is not a power of two")
        if not is_prime(q):
            raise IrError(f"NTT modulus {q} is not prime")
        if (q - 1) % (2 * n) != 0:
            raise IrError(f"modulus {q} has no primitive {2 * n}-th root of unity")
        self.n = n
        self.q = q
        self.psi = root_of_unity(2 * n, q)
        omega = mulmod(U64(self.psi), U64(self.psi), q).item()
        self.twist = _powers(self.psi, n, q)
        inv_psi = modinv(self.psi, q)
        n_inv = modinv(n, q)
        # untwist and the 1/N scaling fused into one table
        self.untwist = _powers(inv_psi, n, q)
        self.untwist = mulmod(self.untwist, U64(n_inv), q)
        self.bitrev = _bit_reverse_indices(n)
        self._fwd_stages = self._stage_tables(omega)
        self._inv_stages = self._stage_tables(modinv(omega, q))

    def _stage_tables(self, omega: int) -> list[np.ndarray]:
        stages = []
        half = 1
        while half < self.n:
            w = pow(omega, self.n // (2 * half), self.q)
            stages.append(_powers(w, half, self.q))
            half *= 2
        return stages

    def _fft(self, values: np.ndarray, stages: list[np.ndarray]) -> np.ndarray:
        q = self.q
        a = values[self.bitrev].copy()
        for tw in stages:
            half = tw.shape[0]
            a = a.reshape(-1, 2, half)
            u = a[:, 0, :]
            v = mulmod(a[:, 1, :], tw, q)
            a = np.stack((addmod(u, v, q), submod(u, v, q)), axis=1)
        return a.reshape(self.n)

    def forward(self, coeffs: np.ndarray) -> np.ndarray:
        """Evaluations at psi^(2k+1), k = 0..N-1."""
        a = mulmod(np.asarray(coeffs, dtype=U64), self.twist, self.q)
        return self._fft(a, self._fwd_stages)

    def inverse(self, evals: np.ndarray) -> np.ndarray:
        a = self._fft(np.asarray(evals, dtype=U64), self._inv_stages)
        return mulmod(a, self.untwist, self.q)

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Negacyclic product of two coefficient vectors."""
        fa = self.forward(a)
        fb = self.forward(b)
        return self.inverse(mulmod(fa, fb, self.q))


_CONTEXTS: dict[tuple[int, int], NttContext] = {}


def get_context(n: int, q: int) -> NttContext:
    key = (n, q)
    ctx = _CONTEXTS.get(key)
    if ctx is None:
        ctx = _CONTEXTS[key] = NttContext(n, q)
    return ctx


def negacyclic_mul(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """a * b mod (X^N + 1, q) for equal-length vectors."""
    a = np.asarray(a, dtype=U64)
    b = np.asarray(b, dtype=U64)
    if a.shape != b.shape:
        raise IrError(f"length mismatch {a.shape} vs {b.shape}")
    return get_context(a.shape[0], q).multiply(a, b)
