"""Exact modular arithmetic kernels.

Coefficient vectors live in numpy uint64 arrays with moduli below 2^60;
products need 128-bit intermediates, which numpy lacks, so `mulmod` uses the
extended-precision Barrett trick: estimate floor(a*b/q) in 80-bit long
double (64-bit mantissa — exact enough that the estimate is off by at most
one), then recover the exact remainder with wrapping 64-bit arithmetic and
a two-step correction.  Falls back to Python-int arithmetic on platforms
whose long double is just a double.

Also: deterministic Miller-Rabin primality (valid far beyond 2^64), search
for NTT-friendly primes (p ≡ 1 mod 2N), and roots of unity mod p.
"""
from __future__ import annotations

import numpy as np

from ..ir.types import IrError

U64 = np.uint64

_LONGDOUBLE_OK = np.finfo(np.longdouble).nmant >= 63


def addmod(a, b, q: int):
    a = np.asarray(a, dtype=U64)
    b = np.asarray(b, dtype=U64)
    s = a + b  # < 2^61, no wrap
    return np.where(s >= U64(q), s - U64(q), s)


def submod(a, b, q: int):
    a = np.asarray(a, dtype=U64)
    b = np.asarray(b, dtype=U64)
    return np.where(a >= b, a - b, a + U64(q) - b)


def negmod(a, q: int):
    a = np.asarray(a, dtype=U64)
    return np.where(a == 0, a, U64(q) - a)


def mulmod(a, b, q: int):
    """Elementwise a*b mod q, exact for q < 2^60."""
    a = np.asarray(a, dtype=U64)
    b = np.asarray(b, dtype=U64)
    if not _LONGDOUBLE_OK:  # pragma: no cover - x86/aarch64 linux has 80-bit
        out = (a.astype(object) * b.astype(object)) % q
        return out.astype(U64)
    quot = (a.astype(np.longdouble) * b.astype(np.longdouble)) / np.longdouble(q)
    k = np.floor(quot).astype(U64)
    with np.errstate(over="ignore"):
        r = a * b - k * U64(q)  # wraps mod 2^64; true value in (-q, 2q)
    r = np.where(r > U64(2) * U64(q), r + U64(q), r)  # k overshot by one
    return np.where(r >= U64(q), r - U64(q), r)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin (witness set valid below 3.3e24)."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime_congruent_one(lo: int, modulus: int, avoid=()) -> int:
    """Smallest prime p >= lo with p ≡ 1 (mod modulus), not in `avoid`."""
    banned = set(avoid)
    k = max(1, -(-(lo - 1) // modulus))
    p = k * modulus + 1
    while p in banned or not is_prime(p):
        p += modulus
    return p


def prime_with_bits(bits: int, modulus: int, avoid=()) -> int:
    """A prime of exactly `bits` bits, ≡ 1 mod `modulus`, not in `avoid`."""
    lo, hi = 1 << (bits - 1), 1 << bits
    p = next_prime_congruent_one(lo, modulus, avoid)
    if p >= hi:
        raise IrError(
            f"no prime of {bits} bits ≡ 1 mod {modulus} available"
        )
    return p


def root_of_unity(order: int, q: int) -> int:
    """A primitive `order`-th root of unity mod prime q (order a power of 2)."""
    if (q - 1) % order:
        raise IrError(f"modulus {q} has no {order}-th root of unity")
    exp = (q - 1) // order
    for r in range(2, 1000):
        y = pow(r, exp, q)
        if order == 1:
            return 1
        if pow(y, order // 2, q) == q - 1:
            return y
    raise IrError(f"no {order}-th root of unity found mod {q}")  # pragma: no cover


def modinv(a: int, q: int) -> int:
    return pow(a, -1, q)


def centered(values, q: int):
    """Representatives in (-q/2, q/2], as Python ints (exact)."""
    arr = np.asarray(values, dtype=U64).astype(object)
    half = q // 2
    return np.where(arr > half, arr - q, arr)
