"""Toy leveled BGV: exact ground truth for compiled ciphertext programs.

NOT hardened cryptography: no constant-time guarantees, no side-channel
defenses, debug access to the secret key.  It exists so tests can decrypt,
measure real noise, and compare homomorphic results against the plaintext
interpreter.

Plaintexts live in 2 x (N/2) slot rows; both rows carry the same data and
slot j of the top row is the evaluation of the plaintext polynomial at
zeta^(5^j) for a primitive 2N-th root zeta mod t.  The exponent-5 tower
makes the column automorphism X -> X^(5^k) act as a cyclic shift by k on
each row, which is exactly the rotation the compiler's layout passes assume.

Ciphertext parts are RNS polynomials over a prefix of the modulus chain.
Key switching (relinearization and rotation) decomposes into one digit per
RNS limb and carries a single auxiliary prime P that is divided away with a
plaintext-preserving correction, mirroring the additive terms of the noise
model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..ir.types import IrError
from .modmath import U64, centered
from .ntt import get_context
from .poly import (
    RingPoly,
    lift_centered,
    sample_error,
    sample_ternary,
    sample_uniform,
    small_negacyclic_product,
)
from .rns import RnsPoly, drop_limb, reconstruct

__all__ = [
    "SlotEncoding",
    "get_encoding",
    "BgvCiphertext",
    "SwitchKey",
    "KeyMaterial",
    "bgv_keygen",
    "bgv_encrypt",
    "bgv_decrypt",
    "bgv_add",
    "bgv_sub",
    "bgv_add_plain",
    "bgv_mul",
    "bgv_mul_plain",
    "bgv_mul_const",
    "bgv_rotate",
    "bgv_relinearize",
    "bgv_mod_reduce",
    "measure_noise",
    "MAX_PARTS",
]

#: largest ciphertext: key degree 3 (four parts)
MAX_PARTS = 4


# ---------------------------------------------------------------------------
# slot encoding
# ---------------------------------------------------------------------------


class SlotEncoding:
    """Power-of-5 slot layout for Z_t[X]/(X^N + 1), t prime, t = 1 mod 2N."""

    def __init__(self, n: int, t: int):
        self.n = n
        self.t = t
        self.slots = n // 2
        self.ctx = get_context(n, t)  # validates t = 1 mod 2N
        row1 = np.empty(self.slots, dtype=np.int64)
        row2 = np.empty(self.slots, dtype=np.int64)
        e = 1
        for j in range(self.slots):
            # forward() index k holds the evaluation at psi^(2k+1)
            row1[j] = (e - 1) // 2
            row2[j] = (2 * n - e - 1) // 2
            e = e * 5 % (2 * n)
        self.row1 = row1
        self.row2 = row2

    def encode(self, values) -> np.ndarray:
        """Slot values (mod t) to plaintext polynomial coefficients."""
        values = np.asarray(values, dtype=np.int64)
        if values.ndim != 1 or values.shape[0] > self.slots:
            raise IrError(
                f"plaintext needs at most {self.slots} slots, got {values.shape}"
            )
        if np.any(values < 0) or np.any(values >= self.t):
            raise IrError(f"plaintext values must lie in [0, {self.t})")
        full = np.zeros(self.slots, dtype=U64)
        full[: values.shape[0]] = values.astype(U64)
        evals = np.zeros(self.n, dtype=U64)
        evals[self.row1] = full
        evals[self.row2] = full
        return self.ctx.inverse(evals)

    def decode(self, coeffs: np.ndarray) -> np.ndarray:
        return self.ctx.forward(np.asarray(coeffs, dtype=U64))[self.row1]


_ENCODINGS: dict[tuple[int, int], SlotEncoding] = {}


def get_encoding(n: int, t: int) -> SlotEncoding:
    key = (n, t)
    enc = _ENCODINGS.get(key)
    if enc is None:
        enc = _ENCODINGS[key] = SlotEncoding(n, t)
    return enc


# ---------------------------------------------------------------------------
# keys
# ---------------------------------------------------------------------------


@dataclass
class SwitchKey:
    """Hybrid switching key: one (a, b) pair per RNS digit, over chain + P."""

    a: list[RnsPoly]
    b: list[RnsPoly]


@dataclass
class KeyMaterial:
    params: object
    sk: np.ndarray = field(repr=False)  # centered ternary; debug/test use
    pk_a: RnsPoly = field(repr=False)
    pk_b: RnsPoly = field(repr=False)
    relin: dict[int, SwitchKey] = field(repr=False, default_factory=dict)
    galois: dict[int, SwitchKey] = field(repr=False, default_factory=dict)
    # continues the keygen stream so encryptions are reproducible per seed
    rng: np.random.Generator = field(repr=False, default=None)


def _switch_key_for(
    target: np.ndarray, sk: np.ndarray, params, rng: np.random.Generator
) -> SwitchKey:
    """Key encrypting `target` (a small centered poly) for digitwise switching.

    Digit i's body hides g_i * target where g_i = P * (Q/q_i) * [(Q/q_i)^-1
    mod q_i]; summing digit_i(c) * g_i reconstructs P*c modulo any prefix of
    the chain, and the whole term vanishes modulo P.
    """
    n = params.ring_dimension
    t = params.plain_modulus
    chain = tuple(params.moduli)
    ext = chain + (params.aux_modulus,)
    big_q = math.prod(chain)
    keys_a, keys_b = [], []
    for i, q_i in enumerate(chain):
        share = big_q // q_i
        g_i = params.aux_modulus * share * pow(share, -1, q_i)
        a = RnsPoly(
            [RingPoly(sample_uniform(n, m, rng), m) for m in ext], ext
        )
        e = sample_error(n, rng)
        body = []
        for limb_a, m in zip(a.limbs, ext):
            term = RingPoly(lift_centered(t * e, m), m)
            gs = RingPoly(lift_centered(target, m), m).scaled(g_i % m)
            body.append(-(limb_a * RingPoly(lift_centered(sk, m), m)) + term + gs)
        keys_a.append(a)
        keys_b.append(RnsPoly(body, ext))
    return SwitchKey(a=keys_a, b=keys_b)


def bgv_keygen(params, seed: int, rotations: tuple[int, ...] = ()) -> KeyMaterial:
    """Deterministic key material: public key, relin keys for key degrees 2
    and 3, and Galois keys for each requested rotation step."""
    n = params.ring_dimension
    t = params.plain_modulus
    chain = tuple(params.moduli)
    rng = np.random.default_rng(seed)
    sk = sample_ternary(n, rng)
    a = RnsPoly([RingPoly(sample_uniform(n, q, rng), q) for q in chain], chain)
    e = sample_error(n, rng)
    b = RnsPoly(
        [
            -(limb * RingPoly(lift_centered(sk, q), q))
            + RingPoly(lift_centered(t * e, q), q)
            for limb, q in zip(a.limbs, chain)
        ],
        chain,
    )
    keys = KeyMaterial(params=params, sk=sk, pk_a=a, pk_b=b)

    s2 = small_negacyclic_product(sk, sk)
    s3 = small_negacyclic_product(s2, sk)
    keys.relin[2] = _switch_key_for(s2, sk, params, rng)
    keys.relin[3] = _switch_key_for(s3, sk, params, rng)

    for step in sorted(set(int(s) % (n // 2) for s in rotations)):
        if step == 0:
            continue
        exponent = pow(5, step, 2 * n)
        rotated_sk = _auto_small(sk, exponent)
        keys.galois[step] = _switch_key_for(rotated_sk, sk, params, rng)
    keys.rng = rng
    return keys


def _auto_small(small: np.ndarray, exponent: int) -> np.ndarray:
    """X -> X^exponent on a small centered integer polynomial."""
    n = small.shape[0]
    idx = (np.arange(n, dtype=np.int64) * exponent) % (2 * n)
    out = np.zeros(n, dtype=np.int64)
    out[idx % n] = np.where(idx >= n, -small, small)
    return out


# ---------------------------------------------------------------------------
# ciphertexts
# ---------------------------------------------------------------------------


@dataclass
class BgvCiphertext:
    """`parts[i]` multiplies s^i at decryption; scale is the plaintext factor
    accumulated by modulus reductions and explicit constant multiplications."""

    parts: list[RnsPoly]
    scale: int = 1

    def __post_init__(self):
        if not 2 <= len(self.parts) <= MAX_PARTS:
            raise IrError(f"ciphertext with {len(self.parts)} parts is not supported")
        chain = self.parts[0].moduli
        if any(p.moduli != chain for p in self.parts):
            raise IrError("ciphertext parts disagree on the modulus chain")

    @property
    def moduli(self) -> tuple[int, ...]:
        return self.parts[0].moduli

    @property
    def level(self) -> int:
        return len(self.moduli) - 1

    @property
    def key_degree(self) -> int:
        return len(self.parts) - 1

    @property
    def n(self) -> int:
        return self.parts[0].n


def bgv_encrypt(values, keys: KeyMaterial, params=None, level: int | None = None) -> BgvCiphertext:
    """Public-key encryption of a slot vector at the given chain level
    (default: the top of the chain)."""
    params = params or keys.params
    n = params.ring_dimension
    t = params.plain_modulus
    if level is None:
        level = len(params.moduli) - 1
    if not 0 <= level < len(params.moduli):
        raise IrError(f"level {level} outside the modulus chain")
    limbs = level + 1
    m = get_encoding(n, t).encode(values).astype(np.int64)

    rng = keys.rng
    u = sample_ternary(n, rng)
    e0 = sample_error(n, rng)
    e1 = sample_error(n, rng)
    pk_b = keys.pk_b.prefix(limbs)
    pk_a = keys.pk_a.prefix(limbs)
    c0 = pk_b.mul_small(u) + RnsPoly.from_small(t * e0 + m, pk_b.moduli)
    c1 = pk_a.mul_small(u) + RnsPoly.from_small(t * e1, pk_a.moduli)
    return BgvCiphertext(parts=[c0, c1], scale=1)


def _phase(ct: BgvCiphertext, sk: np.ndarray) -> RnsPoly:
    acc = ct.parts[0]
    power = None
    for part in ct.parts[1:]:
        power = sk if power is None else small_negacyclic_product(power, sk)
        acc = acc + part.mul_small(power)
    return acc


def bgv_decrypt(ct: BgvCiphertext, keys: KeyMaterial) -> np.ndarray:
    """Slot vector of length N/2 (mod t), with any residual scale divided out."""
    params = keys.params
    t = params.plain_modulus
    big_q = math.prod(ct.moduli)
    raw = reconstruct(_phase(ct, keys.sk))
    m_coeffs = np.array(
        [((v - big_q) if v > big_q // 2 else v) % t for v in raw], dtype=U64
    )
    slots = get_encoding(ct.n, t).decode(m_coeffs)
    if ct.scale != 1:
        inv = pow(ct.scale, -1, t)
        slots = (slots.astype(object) * inv % t).astype(U64)
    return slots


def measure_noise(ct: BgvCiphertext, keys: KeyMaterial, expected) -> float:
    """log2 infinity-norm of c(s) minus the expected encoded payload,
    centered modulo the current chain product (exact zero maps to 0 bits)."""
    params = keys.params
    t = params.plain_modulus
    expected = np.asarray(expected, dtype=np.int64) % t
    payload = (expected.astype(object) * ct.scale % t).astype(np.int64)
    target = get_encoding(ct.n, t).encode(payload)

    big_q = math.prod(ct.moduli)
    raw = reconstruct(_phase(ct, keys.sk))
    worst = 0
    for v, m in zip(raw, target.tolist()):
        d = (v - int(m)) % big_q
        if d > big_q // 2:
            d -= big_q
        worst = max(worst, abs(d))
    return float(math.log2(worst)) if worst else 0.0


# ---------------------------------------------------------------------------
# homomorphic operations
# ---------------------------------------------------------------------------


def _check_binary(a: BgvCiphertext, b: BgvCiphertext) -> None:
    if a.moduli != b.moduli:
        raise IrError(
            f"level mismatch: {len(a.moduli) - 1} vs {len(b.moduli) - 1}"
        )
    if a.scale != b.scale:
        raise IrError(f"scale mismatch: {a.scale} vs {b.scale}")


def _zip_parts(a: BgvCiphertext, b: BgvCiphertext):
    n = max(len(a.parts), len(b.parts))
    for i in range(n):
        pa = a.parts[i] if i < len(a.parts) else None
        pb = b.parts[i] if i < len(b.parts) else None
        yield pa, pb


def bgv_add(a: BgvCiphertext, b: BgvCiphertext) -> BgvCiphertext:
    _check_binary(a, b)
    parts = []
    for pa, pb in _zip_parts(a, b):
        if pa is None:
            parts.append(pb)
        elif pb is None:
            parts.append(pa)
        else:
            parts.append(pa + pb)
    return BgvCiphertext(parts=parts, scale=a.scale)


def bgv_sub(a: BgvCiphertext, b: BgvCiphertext) -> BgvCiphertext:
    _check_binary(a, b)
    parts = []
    for pa, pb in _zip_parts(a, b):
        if pa is None:
            parts.append(-pb)
        elif pb is None:
            parts.append(pa)
        else:
            parts.append(pa - pb)
    return BgvCiphertext(parts=parts, scale=a.scale)


def bgv_add_plain(ct: BgvCiphertext, values, keys: KeyMaterial) -> BgvCiphertext:
    t = keys.params.plain_modulus
    values = np.asarray(values, dtype=np.int64) % t
    payload = (values.astype(object) * ct.scale % t).astype(np.int64)
    m = get_encoding(ct.n, t).encode(payload).astype(np.int64)
    parts = list(ct.parts)
    parts[0] = parts[0] + RnsPoly.from_small(m, ct.moduli)
    return BgvCiphertext(parts=parts, scale=ct.scale)


def bgv_mul(a: BgvCiphertext, b: BgvCiphertext, keys: KeyMaterial) -> BgvCiphertext:
    _check_binary(a, b)
    out_len = len(a.parts) + len(b.parts) - 1
    if out_len > MAX_PARTS:
        raise IrError(
            f"product key degree {out_len - 1} exceeds the supported maximum "
            f"{MAX_PARTS - 1}; relinearize first"
        )
    parts = [RnsPoly.zero(a.n, a.moduli) for _ in range(out_len)]
    for i, pa in enumerate(a.parts):
        for j, pb in enumerate(b.parts):
            parts[i + j] = parts[i + j] + pa * pb
    t = keys.params.plain_modulus
    return BgvCiphertext(parts=parts, scale=a.scale * b.scale % t)


def bgv_mul_plain(ct: BgvCiphertext, values, keys: KeyMaterial) -> BgvCiphertext:
    t = keys.params.plain_modulus
    values = np.asarray(values, dtype=np.int64) % t
    m = get_encoding(ct.n, t).encode(values).astype(np.int64)
    plain = RnsPoly.from_small(m, ct.moduli)
    return BgvCiphertext(
        parts=[p * plain for p in ct.parts], scale=ct.scale
    )


def bgv_mul_const(ct: BgvCiphertext, constant: int, keys: KeyMaterial) -> BgvCiphertext:
    """Scalar multiplication used for scale adjustment: payload and tracked
    scale change together, so the decrypted value is unchanged."""
    t = keys.params.plain_modulus
    c = int(constant) % t
    if c == 0:
        raise IrError("scale adjustment by zero")
    return BgvCiphertext(
        parts=[p.scaled(c) for p in ct.parts], scale=ct.scale * c % t
    )


def _key_switch(
    c: RnsPoly, key: SwitchKey, keys: KeyMaterial
) -> tuple[RnsPoly, RnsPoly]:
    """Digitwise switch of `c` (hiddenly multiplied by the key's target):
    returns (b, a) over c's chain after dividing the auxiliary prime away."""
    params = keys.params
    t = params.plain_modulus
    limbs = len(c.moduli)
    ext = c.moduli + (params.aux_modulus,)

    acc_b = RnsPoly.zero(c.n, ext)
    acc_a = RnsPoly.zero(c.n, ext)
    for i in range(limbs):
        digit = np.array(centered(c.limbs[i].coeffs, c.moduli[i]), dtype=np.int64)
        key_b = _restrict(key.b[i], limbs)
        key_a = _restrict(key.a[i], limbs)
        acc_b = acc_b + key_b.mul_small(digit)
        acc_a = acc_a + key_a.mul_small(digit)
    return drop_limb(acc_b, t), drop_limb(acc_a, t)


def _restrict(x: RnsPoly, limbs: int) -> RnsPoly:
    """Keep the first `limbs` chain limbs plus the trailing auxiliary limb."""
    if len(x.limbs) == limbs + 1:
        return x
    return RnsPoly(
        x.limbs[:limbs] + [x.limbs[-1]], x.moduli[:limbs] + (x.moduli[-1],)
    )


def bgv_relinearize(ct: BgvCiphertext, keys: KeyMaterial) -> BgvCiphertext:
    """Return to key degree 1 by switching every s^i component (i >= 2)."""
    if ct.key_degree <= 1:
        return ct
    c0, c1 = ct.parts[0], ct.parts[1]
    for i, part in enumerate(ct.parts[2:], start=2):
        key = keys.relin.get(i)
        if key is None:
            raise IrError(f"no relinearization key for key degree {i}")
        b, a = _key_switch(part, key, keys)
        c0 = c0 + b
        c1 = c1 + a
    return BgvCiphertext(parts=[c0, c1], scale=ct.scale)


def bgv_rotate(ct: BgvCiphertext, step: int, keys: KeyMaterial) -> BgvCiphertext:
    """Cyclic slot rotation: slot j of the result is slot j+step of the input."""
    slots = ct.n // 2
    step = int(step) % slots
    if step == 0:
        return BgvCiphertext(parts=list(ct.parts), scale=ct.scale)
    if ct.key_degree != 1:
        raise IrError("rotation requires a relinearized (degree-1) ciphertext")
    key = keys.galois.get(step)
    if key is None:
        raise IrError(f"no Galois key for rotation step {step}")
    exponent = pow(5, step, 2 * ct.n)
    r0 = ct.parts[0].automorphism(exponent)
    r1 = ct.parts[1].automorphism(exponent)
    b, a = _key_switch(r1, key, keys)
    return BgvCiphertext(parts=[r0 + b, a], scale=ct.scale)


def bgv_mod_reduce(ct: BgvCiphertext, keys: KeyMaterial) -> BgvCiphertext:
    """Drop the top chain prime; the plaintext picks up q^{-1} mod t, which
    is tracked in the scale."""
    t = keys.params.plain_modulus
    q_last = ct.moduli[-1]
    parts = [drop_limb(p, t) for p in ct.parts]
    return BgvCiphertext(parts=parts, scale=ct.scale * pow(q_last, -1, t) % t)
