"""Forward noise-bound analysis for BGV-style ciphertext programs.

The tracked quantity is the *critical* noise of a ciphertext: the largest
coefficient, centered modulo the current modulus, of ``c(s) - encode(m)``.
For BGV ciphertexts that quantity equals ``t * e`` where ``e`` is the raw
error polynomial, so every rule below carries the plaintext-modulus factor
explicitly.  Bounds are stored and combined in the log2 domain so that deep
circuits cannot overflow floats.

A ciphertext decrypts correctly while its critical noise stays below half
the current modulus; the safety check demands two extra bits of headroom
(``bits <= log2(q) - 2``).

Three expansion-factor variants are offered for the ring-multiplication
growth factor ``delta``:

* worst-case  (``delta = N``): provable sup-norm bound,
* average-case (``delta = 2 * sqrt(N)``): high-probability heuristic bound,
* variance    (``delta = sqrt(N)``): central-tendency estimate; useful for
  comparisons but *not* an upper bound, so it is never used for safety
  decisions or parameter sizing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from ..ir.types import Function, IrError, IrModule, SecretType, Value
from .. import mgmt

__all__ = [
    "NoiseModelVariant",
    "WORST_CASE",
    "AVG_CASE",
    "VARIANCE",
    "variant_named",
    "NoiseBound",
    "propagate_noise",
    "NoiseAnalysis",
    "analyze_noise",
]

#: error-bound multiplier on the sampler's standard deviation (6 sigma)
ERROR_WIDTH = 6.0

#: multiplier applied to the additive terms of key-switching and
#: modulus-reduction rules, absorbing second-order contributions
SLACK = 2.0

#: decryption requires this many bits of headroom below log2(q)
SAFETY_MARGIN_BITS = 2


@dataclass(frozen=True)
class NoiseModelVariant:
    """A choice of ring-expansion factor for products of random polynomials."""

    name: str
    #: does the variant upper-bound realized noise (usable for safety)?
    is_upper_bound: bool

    def expansion(self, ring_dimension: int) -> float:
        if self.name == "worst-case-inf":
            return float(ring_dimension)
        if self.name == "avg-case-inf":
            return 2.0 * math.sqrt(ring_dimension)
        return math.sqrt(ring_dimension)


WORST_CASE = NoiseModelVariant("worst-case-inf", True)
AVG_CASE = NoiseModelVariant("avg-case-inf", True)
VARIANCE = NoiseModelVariant("variance", False)

_VARIANTS = {
    "worst": WORST_CASE,
    "worst-case": WORST_CASE,
    "worst-case-inf": WORST_CASE,
    "avg": AVG_CASE,
    "avg-case": AVG_CASE,
    "avg-case-inf": AVG_CASE,
    "variance": VARIANCE,
}


def variant_named(name) -> NoiseModelVariant:
    if isinstance(name, NoiseModelVariant):
        return name
    try:
        return _VARIANTS[str(name)]
    except KeyError:
        raise IrError(
            f"unknown noise model variant {name!r}; "
            f"choose one of {sorted(set(v.name for v in _VARIANTS.values()))}"
        ) from None


@dataclass(frozen=True)
class NoiseBound:
    """log2 of a bound on the critical noise ``||c(s) - encode(m)||``."""

    bits: float

    def __post_init__(self):
        if not math.isfinite(self.bits):
            raise IrError("noise bound overflowed")

    def safe_for(self, log_q: float) -> bool:
        return self.bits <= log_q - SAFETY_MARGIN_BITS


def _log2(x: float) -> float:
    return math.log2(x)


def _ladd(*bits: float) -> float:
    """log2(sum of 2**b for b in bits), computed stably."""
    top = max(bits)
    return top + math.log2(sum(2.0 ** (b - top) for b in bits))


#: op kinds propagate_noise understands, for error messages
NOISE_RULE_KINDS = (
    "fresh-sk",
    "fresh-pk",
    "add",
    "add-plain",
    "mul",
    "mul-plain",
    "mul-const",
    "relinearize",
    "rotate",
    "mod-reduce",
)


def propagate_noise(
    op_kind: str,
    operand_bounds: list[NoiseBound],
    params,
    variant: NoiseModelVariant | str,
    level: int | None = None,
) -> NoiseBound:
    """Apply one noise-growth rule.

    ``params`` needs ``ring_dimension``, ``plain_modulus``, ``sigma`` and
    ``moduli``; ``level`` (chain index of the *operand*) is required for the
    rules that touch the modulus chain: key switching (``relinearize`` /
    ``rotate``, whose additive term scales with the number of RNS limbs) and
    ``mod-reduce`` (which divides by ``moduli[level]``).
    """
    variant = variant_named(variant)
    delta = variant.expansion(params.ring_dimension)
    t = float(params.plain_modulus)
    b_err = ERROR_WIDTH * params.sigma
    v = [b.bits for b in operand_bounds]

    if op_kind == "fresh-sk":
        return NoiseBound(_log2(t * b_err * (1.0 + delta)))
    if op_kind == "fresh-pk":
        return NoiseBound(_log2(t * b_err * (1.0 + 2.0 * delta)))
    if op_kind in ("add", "sub"):
        return NoiseBound(_ladd(v[0], v[1]))
    if op_kind == "add-plain":
        # the encoded plaintext is noise-free; the error term is unchanged
        return NoiseBound(v[0])
    if op_kind == "mul-plain":
        # encoded plaintext coefficients are bounded by t/2
        return NoiseBound(_log2(delta * t / 2.0) + v[0])
    if op_kind == "mul-const":
        # scalar constant in [1, t): no ring expansion
        return NoiseBound(_log2(t / 2.0) + v[0])
    if op_kind == "mul":
        cross = _log2(t / 2.0) + _ladd(v[0], v[1])
        return NoiseBound(_log2(delta) + _ladd(cross, v[0] + v[1]))
    if op_kind in ("relinearize", "rotate"):
        if level is None:
            raise IrError(f"'{op_kind}' noise rule needs the operand level")
        limbs = level + 1
        switch = SLACK * 2.0 * delta * t * b_err * limbs
        return NoiseBound(_ladd(v[0], _log2(switch)))
    if op_kind == "mod-reduce":
        if level is None:
            raise IrError("'mod-reduce' noise rule needs the operand level")
        dropped = params.moduli[level]
        rounding = SLACK * (t / 2.0) * (1.0 + delta)
        return NoiseBound(_ladd(v[0] - _log2(dropped), _log2(rounding)))
    raise IrError(
        f"no noise-growth rule for op kind '{op_kind}' "
        f"(known: {', '.join(NOISE_RULE_KINDS)})"
    )


# ---------------------------------------------------------------------------
# whole-module analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReduceEvent:
    """One mod_reduce: where in the chain it fired and what noise entered."""

    function: str
    level: int
    entering_bits: float


@dataclass
class NoiseAnalysis:
    """Noise bounds per secret value, plus chain placement and reduce events."""

    params: object
    variant: NoiseModelVariant
    bounds: dict[int, NoiseBound] = field(default_factory=dict)
    levels: dict[int, int] = field(default_factory=dict)
    events: list[ReduceEvent] = field(default_factory=list)

    def bound_of(self, v: Value) -> NoiseBound:
        return self.bounds[v.uid]

    def level_of(self, v: Value) -> int:
        return self.levels[v.uid]

    def budget_bits(self, level: int) -> float:
        """Safe noise budget (bits) for a value living at `level`."""
        return self.log_q(level) - SAFETY_MARGIN_BITS

    def log_q(self, level: int) -> float:
        return sum(_log2(q) for q in self.params.moduli[: level + 1])

    def max_bits_at_level(self, level: int) -> float | None:
        found = None
        for uid, b in self.bounds.items():
            if self.levels.get(uid) == level:
                found = b.bits if found is None else max(found, b.bits)
        return found

    def to_json(self, module: IrModule) -> str:
        doc = {}
        for fn in module.functions:
            names = mgmt._printed_names(fn)
            values = {}
            for uid, b in self.bounds.items():
                if uid not in names:
                    continue
                lvl = self.levels[uid]
                values[names[uid]] = {
                    "bits": round(b.bits, 3),
                    "level": lvl,
                    "bound_limit": round(self.budget_bits(lvl), 3),
                }
            if values:
                doc[fn.name] = values
        return json.dumps(doc, indent=2)


_LOOP_OPS = ("affine.for", "scf.for", "scf.if")

_KIND_BY_OP = {
    "tensor_ext.rotate": "rotate",
    "mgmt.relinearize": "relinearize",
    "mgmt.mod_reduce": "mod-reduce",
    "mgmt.adjust_scale": "mul-const",
}


def _site_rule(site: mgmt.Site) -> str:
    """Map an encrypted-dataflow step to a noise rule name."""
    kind = site.kind
    if kind in ("secret.conceal",):
        return "fresh-pk"
    if kind in _KIND_BY_OP:
        return _KIND_BY_OP[kind]
    if kind in mgmt._MUL_OPS:
        return "mul" if len(site.secret_in) >= 2 else "mul-plain"
    if kind in mgmt._ADD_SUB_OPS:
        return "add" if len(site.secret_in) >= 2 else "add-plain"
    if kind == "mgmt.bootstrap":
        raise IrError("bootstrapping is not supported by the noise model")
    if not site.secret_in:
        # a region computed entirely from public data is a fresh encryption
        return "fresh-pk"
    raise IrError(f"no noise-growth rule for op '{kind}'")


def _reject_hidden_regions(fn: Function) -> None:
    for op in fn.body.ops:
        if op.name in _LOOP_OPS and op.regions:
            for block in op.regions:
                for inner in block.ops:
                    hides_secret = inner.name == "secret.generic" or any(
                        isinstance(r.type, SecretType) for r in inner.results
                    )
                    if hides_secret:
                        raise IrError(
                            f"'{op.name}' in @{fn.name} hides encrypted ops "
                            "from noise analysis; unroll loops first"
                        )


def analyze_noise(
    module: IrModule,
    params,
    variant: NoiseModelVariant | str = WORST_CASE,
    check_safety: bool = True,
) -> NoiseAnalysis:
    """Propagate noise bounds through every function of `module`.

    Secret arguments and `secret.conceal` results start at the fresh
    public-key bound; each dataflow step applies its growth rule.  Values
    are placed on the modulus chain by their reduction count, with fresh
    values adopting the level of their first use.  With `check_safety`
    (the default) a bound exceeding the safe budget at its level raises,
    naming the offending op.
    """
    variant = variant_named(variant)
    if not variant.is_upper_bound and check_safety:
        raise IrError(
            f"variant '{variant.name}' is not an upper bound and cannot "
            "back a safety check; analyze with check_safety=False"
        )
    top_level = len(params.moduli) - 1
    out = NoiseAnalysis(params=params, variant=variant)
    fresh = propagate_noise("fresh-pk", [], params, variant)

    for fn in module.functions:
        _reject_hidden_regions(fn)
        vals = mgmt._secret_values(fn)
        if not vals:
            continue
        solver = mgmt._level_constraints(fn, repair=False)
        drops = mgmt._component_drops(vals, solver)
        deepest = max(drops.values(), default=0)
        if deepest > top_level:
            raise IrError(
                f"@{fn.name} consumes {deepest + 1} chain levels but the "
                f"modulus chain only has {top_level + 1}"
            )
        levels = {uid: top_level - d for uid, d in drops.items()}
        out.levels.update(levels)

        sites = mgmt.function_sites(fn)
        derived = {s.result.uid for s in sites}
        bounds: dict[int, NoiseBound] = {
            v.uid: fresh for v in vals if v.uid not in derived
        }

        def check(value: Value, kind: str) -> None:
            if not check_safety:
                return
            b = bounds[value.uid]
            budget = out.budget_bits(levels[value.uid])
            if b.bits > budget:
                raise IrError(
                    f"noise bound {b.bits:.1f} bits at '{kind}' in "
                    f"@{fn.name} exceeds the safe budget {budget:.1f} bits "
                    f"at level {levels[value.uid]}"
                )

        for v in vals:
            if v.uid in bounds:
                check(v, "fresh encryption")

        for site in sites:
            rule = _site_rule(site)
            operands = [bounds[v.uid] for v in site.secret_in]
            result = site.result
            if rule in ("relinearize", "rotate"):
                lvl = levels[result.uid]
            elif rule == "mod-reduce":
                lvl = levels[site.secret_in[0].uid]
            else:
                lvl = None
            if rule == "fresh-pk":
                bounds[result.uid] = fresh
            else:
                bounds[result.uid] = propagate_noise(
                    rule, operands, params, variant, level=lvl
                )
            if rule == "mod-reduce":
                out.events.append(
                    ReduceEvent(fn.name, lvl, operands[0].bits)
                )
            check(result, site.kind)
        out.bounds.update(bounds)
    return out
