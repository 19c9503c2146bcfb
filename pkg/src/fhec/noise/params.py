"""Scheme parameter selection: ring dimension, modulus chain, plaintext prime.

The selector sizes one RNS limb per chain level.  Levels where a modulus
reduction fires get a limb just large enough that the reduction resets noise
to roughly the fresh level; remaining levels start at a 20-bit floor and are
raised only as far as decryption safety demands.  Ring dimension and limb
sizes feed back on each other (a bigger ring means more noise means bigger
limbs), so the selector iterates to a fixed point and then picks concrete
NTT-friendly primes of the chosen sizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..ir.types import IrError, IrModule
from ..ir.passes import register_pass
from ..mgmt import analyze_levels
from ..rlwe.modmath import is_prime, next_prime_congruent_one, prime_with_bits
from .model import (
    AVG_CASE,
    NoiseModelVariant,
    analyze_noise,
    propagate_noise,
    variant_named,
)

__all__ = [
    "SchemeParams",
    "DEFAULT_SECURITY_TABLE",
    "lookup_ring_dimension",
    "select_parameters",
    "validate_parameters",
    "attach_parameters",
    "module_parameters",
]

#: 128-bit security: largest log2(P * prod q_i) allowed per power-of-two ring
#: dimension, for ternary secrets.  Values follow the published homomorphic
#: encryption security standard tables.
DEFAULT_SECURITY_TABLE: tuple[tuple[int, int], ...] = (
    (1024, 27),
    (2048, 54),
    (4096, 109),
    (8192, 218),
    (16384, 438),
)

#: limb-size bounds (bits); 60 keeps products inside uint64 NTT arithmetic
MIN_LIMB_BITS = 20
MAX_LIMB_BITS = 60

#: bits a reduction should land *below* the fresh-noise level
RESET_HEADROOM_BITS = 4


@dataclass(frozen=True)
class SchemeParams:
    """Concrete BGV/BFV parameters.

    `moduli` is indexed by chain level: `moduli[0]` is the last modulus
    standing after all reductions, `moduli[-1]` the top where fresh
    ciphertexts start.  `aux_modulus` is the extension prime used by hybrid
    key switching and must dominate every `moduli` entry.
    """

    ring_dimension: int
    moduli: tuple[int, ...]
    plain_modulus: int
    aux_modulus: int
    sigma: float = 3.2
    variant: str = AVG_CASE.name

    @property
    def slots(self) -> int:
        return self.ring_dimension // 2

    @property
    def top_level(self) -> int:
        return len(self.moduli) - 1

    def log_q(self, level: int | None = None) -> float:
        if level is None:
            level = self.top_level
        return sum(math.log2(q) for q in self.moduli[: level + 1])

    def total_bits(self) -> float:
        """log2 of the full key-switching modulus P * prod(q_i)."""
        return self.log_q() + math.log2(self.aux_modulus)

    def to_dict(self) -> dict:
        return {
            "ring_dimension": self.ring_dimension,
            "moduli": list(self.moduli),
            "plain_modulus": self.plain_modulus,
            "aux_modulus": self.aux_modulus,
            "sigma": self.sigma,
            "variant": self.variant,
            "slots": self.slots,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SchemeParams":
        return cls(
            ring_dimension=int(doc["ring_dimension"]),
            moduli=tuple(int(q) for q in doc["moduli"]),
            plain_modulus=int(doc["plain_modulus"]),
            aux_modulus=int(doc["aux_modulus"]),
            sigma=float(doc.get("sigma", 3.2)),
            variant=str(doc.get("variant", AVG_CASE.name)),
        )


def lookup_ring_dimension(
    total_modulus_bits: float,
    table: tuple[tuple[int, int], ...] = DEFAULT_SECURITY_TABLE,
) -> int:
    """Smallest ring dimension whose security cap admits the modulus."""
    for n, cap in sorted(table):
        if total_modulus_bits <= cap:
            return n
    limit = max(cap for _, cap in table)
    raise IrError(
        f"no ring dimension in the security table supports a "
        f"{total_modulus_bits:.0f}-bit modulus (largest allows {limit} bits); "
        "the program is too deep for the table"
    )


def _table_cap(n: int, table) -> int:
    for dim, cap in table:
        if dim == n:
            return cap
    raise IrError(f"ring dimension {n} is not in the security table")


@dataclass(frozen=True)
class _StandinParams:
    """Power-of-two moduli stand-ins used while limb sizes are being chosen."""

    ring_dimension: int
    moduli: tuple[int, ...]
    plain_modulus: int
    sigma: float = 3.2


def _chain_levels(module: IrModule) -> int:
    info = analyze_levels(module)
    depth = max(info.depth.values(), default=0)
    used = max(info.chain_length.values(), default=0)
    return max(depth, used)


def _resize(module, sizes, n, t, variant, table) -> list[int]:
    """One sizing step: reduction-driven limb sizes plus safety repair.

    A prime of bit size `s` lies in [2**(s-1), 2**s), so each limb is only
    *guaranteed* to contribute s-1 bits of modulus.  The analysis therefore
    runs against the lower edge 2**(s-1) (concrete primes can only shrink
    noise relative to it) and the safety budget counts s-1 bits per limb.
    """
    levels = len(sizes)
    standin = _StandinParams(n, tuple(1 << (s - 1) for s in sizes), t)
    analysis = analyze_noise(module, standin, variant, check_safety=False)
    fresh = propagate_noise("fresh-pk", [], standin, variant).bits

    entering: dict[int, float] = {}
    for ev in analysis.events:
        entering[ev.level] = max(
            entering.get(ev.level, ev.entering_bits), ev.entering_bits
        )
    new = []
    for lvl in range(levels):
        if lvl in entering:
            want = math.ceil(entering[lvl] - fresh + RESET_HEADROOM_BITS) + 1
            new.append(min(max(want, MIN_LIMB_BITS), MAX_LIMB_BITS))
        else:
            new.append(MIN_LIMB_BITS)

    # decryption safety: the moduli up to each level must dominate the
    # largest noise bound living there, with margin
    for lvl in range(levels):
        worst = analysis.max_bits_at_level(lvl)
        if worst is None:
            continue
        need = math.ceil(worst) + 2 + (lvl + 1)  # lvl+1 limbs of s-1 bits
        deficit = need - sum(new[: lvl + 1])
        j = lvl
        while deficit > 0 and j >= 0:
            take = min(MAX_LIMB_BITS - new[j], deficit)
            new[j] += take
            deficit -= take
            j -= 1
        if deficit > 0:
            raise IrError(
                f"noise at level {lvl} needs {need} modulus bits but "
                f"{lvl + 1} limbs of {MAX_LIMB_BITS} bits cannot hold it"
            )
    return new


def select_parameters(
    module: IrModule,
    plaintext_modulus_hint: int = 65537,
    *,
    variant: NoiseModelVariant | str = AVG_CASE,
    scheme: str = "bgv",
    table: tuple[tuple[int, int], ...] = DEFAULT_SECURITY_TABLE,
    max_iterations: int = 10,
) -> SchemeParams:
    """Choose ring dimension, modulus chain, plaintext prime and key-switch
    prime for `module`.

    The chain has one limb per level the program consumes (multiplicative
    depth, or more if extra reductions were inserted).  BGV limbs are
    tightened per level as described in the module docstring; the BFV path
    keeps every limb at the 60-bit maximum since BFV never reduces.
    """
    variant = variant_named(variant)
    if not variant.is_upper_bound:
        raise IrError(
            f"variant '{variant.name}' is not an upper bound and cannot "
            "drive parameter selection"
        )
    if scheme not in ("bgv", "bfv"):
        raise IrError(f"unknown scheme '{scheme}'")
    if plaintext_modulus_hint < 2:
        raise IrError("plaintext modulus hint must be at least 2")

    levels = _chain_levels(module) + 1
    sizes = [MAX_LIMB_BITS] * levels
    n = lookup_ring_dimension(sum(sizes) + max(sizes), table)
    if scheme == "bgv":
        for _ in range(max_iterations):
            t = next_prime_congruent_one(plaintext_modulus_hint, 2 * n)
            new = _resize(module, sizes, n, t, variant, table)
            new_n = lookup_ring_dimension(sum(new) + max(new), table)
            if new == sizes and new_n == n:
                break
            sizes, n = new, new_n

    n = lookup_ring_dimension(sum(sizes) + max(sizes), table)
    t = next_prime_congruent_one(plaintext_modulus_hint, 2 * n)
    avoid = {t}
    moduli: list[int] = []
    for s in sizes:
        q = prime_with_bits(s, 2 * n, avoid)
        moduli.append(q)
        avoid.add(q)
    aux = next_prime_congruent_one(max(moduli), 2 * n, avoid)
    params = SchemeParams(
        ring_dimension=n,
        moduli=tuple(moduli),
        plain_modulus=t,
        aux_modulus=aux,
        variant=variant.name,
    )
    problems = validate_parameters(params, module, table=table)
    if problems:
        raise IrError(
            "selected parameters failed validation: " + "; ".join(problems)
        )
    return params


def validate_parameters(
    params: SchemeParams,
    module: IrModule | None = None,
    table: tuple[tuple[int, int], ...] = DEFAULT_SECURITY_TABLE,
) -> list[str]:
    """Check a parameter set; returns a list of problems (empty = valid)."""
    problems: list[str] = []
    n = params.ring_dimension
    if n < 2 or n & (n - 1):
        problems.append(f"ring dimension {n} is not a power of two")
    try:
        cap = _table_cap(n, table)
        if params.total_bits() > cap:
            problems.append(
                f"total modulus {params.total_bits():.1f} bits exceeds the "
                f"{cap}-bit security cap for ring dimension {n}"
            )
    except IrError as e:
        problems.append(str(e))

    order = 2 * n
    for i, q in enumerate(params.moduli):
        if not is_prime(q):
            problems.append(f"modulus q_{i} = {q} is not prime")
        elif q % order != 1:
            problems.append(f"modulus q_{i} = {q} is not 1 mod 2N")
        if q >= 1 << MAX_LIMB_BITS:
            problems.append(f"modulus q_{i} = {q} is {MAX_LIMB_BITS} bits or more")
    if len(set(params.moduli)) != len(params.moduli):
        problems.append("moduli are not distinct")

    t = params.plain_modulus
    if not is_prime(t):
        problems.append(f"plaintext modulus {t} is not prime")
    elif t % order != 1:
        problems.append(f"plaintext modulus {t} is not 1 mod 2N")
    if t in params.moduli:
        problems.append("plaintext modulus collides with a chain modulus")

    p = params.aux_modulus
    if not is_prime(p):
        problems.append(f"key-switch modulus {p} is not prime")
    elif p % order != 1:
        problems.append(f"key-switch modulus {p} is not 1 mod 2N")
    if p < max(params.moduli):
        problems.append("key-switch modulus is smaller than a chain modulus")
    if p in params.moduli:
        problems.append("key-switch modulus collides with a chain modulus")

    if module is not None and not problems:
        try:
            analyze_noise(module, params, params.variant, check_safety=True)
        except IrError as e:
            problems.append(str(e))
    return problems


# ---------------------------------------------------------------------------
# carrying parameters with the module
# ---------------------------------------------------------------------------

_ATTR_KEYS = {
    "ring_dimension": "bgv.ring_dimension",
    "moduli": "bgv.moduli",
    "plain_modulus": "bgv.plain_modulus",
    "aux_modulus": "bgv.aux_modulus",
    "variant": "bgv.variant",
}


def attach_parameters(module: IrModule, params: SchemeParams) -> None:
    """Record `params` as attributes of the module's first function, so the
    textual form carries them to later pipeline stages and to clients."""
    if not module.functions:
        raise IrError("cannot attach parameters to an empty module")
    attrs = module.functions[0].attributes
    attrs[_ATTR_KEYS["ring_dimension"]] = params.ring_dimension
    attrs[_ATTR_KEYS["moduli"]] = list(params.moduli)
    attrs[_ATTR_KEYS["plain_modulus"]] = params.plain_modulus
    attrs[_ATTR_KEYS["aux_modulus"]] = params.aux_modulus
    attrs[_ATTR_KEYS["variant"]] = params.variant


def module_parameters(module: IrModule) -> SchemeParams | None:
    """Read back parameters stored by `attach_parameters`, if present."""
    for fn in module.functions:
        attrs = fn.attributes
        if _ATTR_KEYS["ring_dimension"] not in attrs:
            continue
        return SchemeParams(
            ring_dimension=int(attrs[_ATTR_KEYS["ring_dimension"]]),
            moduli=tuple(int(q) for q in attrs[_ATTR_KEYS["moduli"]]),
            plain_modulus=int(attrs[_ATTR_KEYS["plain_modulus"]]),
            aux_modulus=int(attrs[_ATTR_KEYS["aux_modulus"]]),
            variant=str(attrs.get(_ATTR_KEYS["variant"], AVG_CASE.name)),
        )
    return None


@register_pass("select-parameters")
def _select_parameters_pass(
    module: IrModule,
    plain_modulus: int = 65537,
    variant: str = AVG_CASE.name,
    scheme: str = "bgv",
) -> IrModule:
    params = select_parameters(
        module, int(plain_modulus), variant=variant, scheme=scheme
    )
    attach_parameters(module, params)
    return module
