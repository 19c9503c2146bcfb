"""Residue-number-system polynomials over a prefix of the modulus chain.

An `RnsPoly` holds one `RingPoly` limb per modulus; arithmetic is limbwise.
`drop_limb` implements the BGV modulus switch: subtract a correction that is
congruent to the value modulo the dropped prime *and* to zero modulo the
plaintext modulus, then divide exactly.  That keeps the encrypted payload
intact while shrinking noise by roughly the dropped prime.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ir.types import IrError
from .modmath import U64, addmod, centered, mulmod, submod
from .poly import RingPoly, lift_centered

__all__ = ["RnsPoly", "decompose", "reconstruct", "drop_limb"]


@dataclass
class RnsPoly:
    """A ring element represented modulo each prime of a chain prefix."""

    limbs: list[RingPoly]
    moduli: tuple[int, ...]

    def __post_init__(self):
        if not self.limbs:
            raise IrError("RNS value needs at least one limb")
        if len(self.limbs) != len(self.moduli):
            raise IrError("limb/modulus count mismatch")
        n = self.limbs[0].n
        for limb, q in zip(self.limbs, self.moduli):
            if limb.modulus != q:
                raise IrError("limb modulus does not match the chain")
            if limb.n != n:
                raise IrError("limbs disagree on ring degree")
        if len(set(self.moduli)) != len(self.moduli):
            raise IrError("chain moduli must be distinct")

    @property
    def n(self) -> int:
        return self.limbs[0].n

    @property
    def level(self) -> int:
        return len(self.moduli) - 1

    def _check(self, other: "RnsPoly") -> None:
        if self.moduli != other.moduli:
            raise IrError("RNS chain mismatch")

    def __add__(self, other: "RnsPoly") -> "RnsPoly":
        self._check(other)
        return RnsPoly(
            [a + b for a, b in zip(self.limbs, other.limbs)], self.moduli
        )

    def __sub__(self, other: "RnsPoly") -> "RnsPoly":
        self._check(other)
        return RnsPoly(
            [a - b for a, b in zip(self.limbs, other.limbs)], self.moduli
        )

    def __neg__(self) -> "RnsPoly":
        return RnsPoly([-a for a in self.limbs], self.moduli)

    def __mul__(self, other: "RnsPoly") -> "RnsPoly":
        self._check(other)
        return RnsPoly(
            [a * b for a, b in zip(self.limbs, other.limbs)], self.moduli
        )

    def scaled(self, factor: int) -> "RnsPoly":
        return RnsPoly([a.scaled(factor) for a in self.limbs], self.moduli)

    def mul_small(self, small: np.ndarray) -> "RnsPoly":
        """Multiply by a small centered integer polynomial (e.g. a secret)."""
        return RnsPoly(
            [
                limb * RingPoly(lift_centered(small, q), q)
                for limb, q in zip(self.limbs, self.moduli)
            ],
            self.moduli,
        )

    def automorphism(self, exponent: int) -> "RnsPoly":
        return RnsPoly(
            [limb.automorphism(exponent) for limb in self.limbs], self.moduli
        )

    def prefix(self, levels: int) -> "RnsPoly":
        """Restrict to the first `levels` limbs (a valid residue mod their product)."""
        if not 1 <= levels <= len(self.limbs):
            raise IrError(f"cannot take {levels} limbs of {len(self.limbs)}")
        return RnsPoly(self.limbs[:levels], self.moduli[:levels])

    @classmethod
    def zero(cls, n: int, moduli: tuple[int, ...]) -> "RnsPoly":
        return cls([RingPoly(np.zeros(n, dtype=U64), q) for q in moduli], moduli)

    @classmethod
    def from_small(cls, small: np.ndarray, moduli: tuple[int, ...]) -> "RnsPoly":
        """Lift a centered small integer polynomial into every limb."""
        return cls([RingPoly(lift_centered(small, q), q) for q in moduli], moduli)


def decompose(values: list[int], moduli: tuple[int, ...], n: int | None = None) -> RnsPoly:
    """Residues of arbitrary-precision coefficients modulo each chain prime."""
    if not moduli:
        raise IrError("empty modulus chain")
    if n is None:
        n = len(values)
    if len(values) != n:
        raise IrError("coefficient count mismatch")
    limbs = []
    for q in moduli:
        limbs.append(
            RingPoly(np.array([v % q for v in values], dtype=U64), q)
        )
    return RnsPoly(limbs, tuple(moduli))


def reconstruct(x: RnsPoly) -> list[int]:
    """CRT-combine limbs into exact integers in [0, prod moduli)."""
    big_q = 1
    for q in x.moduli:
        big_q *= q
    out = [0] * x.n
    for limb, q in zip(x.limbs, x.moduli):
        share = big_q // q
        factor = share * pow(share, -1, q)
        for i, c in enumerate(limb.coeffs.tolist()):
            out[i] = (out[i] + c * factor) % big_q
    return out


def drop_limb(x: RnsPoly, plain_modulus: int) -> RnsPoly:
    """Divide by the last chain prime, preserving the value mod `plain_modulus`.

    The correction d satisfies d = x (mod q_last) and d = 0 (mod t), so
    (x - d) / q_last is exact over the remaining limbs and the plaintext
    residue is multiplied by exactly q_last^{-1} mod t, which the caller
    tracks as a scale factor.
    """
    if len(x.limbs) < 2:
        raise IrError("cannot drop the last remaining limb")
    t = plain_modulus
    q_last = x.moduli[-1]
    if q_last % t == 0:
        raise IrError("dropped modulus shares a factor with the plaintext modulus")
    # d0: centered representative of x mod q_last
    d0 = np.array(centered(x.limbs[-1].coeffs, q_last), dtype=np.int64)
    # mu makes d = d0 + q_last * mu divisible by t, with |mu| <= t/2
    q_inv_t = pow(-q_last, -1, t)
    mu = (d0 % t) * q_inv_t % t
    mu = np.where(mu > t // 2, mu - t, mu).astype(np.int64)

    new_limbs = []
    for limb, q in zip(x.limbs[:-1], x.moduli[:-1]):
        corr = addmod(
            lift_centered(d0, q),
            mulmod(lift_centered(mu, q), U64(q_last % q), q),
            q,
        )
        num = submod(limb.coeffs, corr, q)
        inv = pow(q_last, -1, q)
        new_limbs.append(RingPoly(mulmod(num, U64(inv), q), q))
    return RnsPoly(new_limbs, x.moduli[:-1])
