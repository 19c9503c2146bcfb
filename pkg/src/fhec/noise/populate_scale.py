"""Resolve symbolic scale placeholders into concrete plaintext factors.

BGV modulus reduction divides the ciphertext by the dropped prime, so the
decrypted payload picks up a factor of ``q_i^{-1} mod t`` per reduction and
ciphertext products multiply those factors together.  Maintenance insertion
marks every addition whose operands *might* disagree with a bare
``mgmt.adjust_scale`` placeholder; once concrete moduli are known this pass
computes each value's true scale, turns placeholders that matter into
multiplications by the equalizing constant, erases the ones that do not,
and records the scale of every returned value so clients can divide it out
after decryption.
"""
from __future__ import annotations

from ..ir.types import Function, IrError, IrModule, SecretType, replace_uses
from ..ir.passes import register_pass
from .. import mgmt
from .params import SchemeParams, module_parameters

__all__ = ["populate_scale", "RESULT_SCALE_ATTR"]

#: function result attribute naming the plaintext factor left on a result
RESULT_SCALE_ATTR = "mgmt.scale"


def populate_scale(module: IrModule, params: SchemeParams | None = None) -> IrModule:
    """Fill in concrete scales across `module` (in place; returns it).

    `params` defaults to the parameters attached to the module by selection;
    without either, this pass cannot run.
    """
    if params is None:
        params = module_parameters(module)
    if params is None:
        raise IrError(
            "scale population needs scheme parameters; "
            "run select-parameters first"
        )
    t = params.plain_modulus
    for q in params.moduli:
        if q % t == 0:
            raise IrError(
                f"chain modulus {q} is divisible by the plaintext modulus "
                f"{t}, so its inverse scale does not exist"
            )
    for fn in module.functions:
        _populate_function(fn, params)
    return module


def _populate_function(fn: Function, params: SchemeParams) -> None:
    t = params.plain_modulus
    solver = mgmt._level_constraints(fn, repair=False)
    drops = mgmt._component_drops(mgmt._secret_values(fn), solver)
    top = params.top_level
    deepest = max(drops.values(), default=0)
    if deepest > top:
        raise IrError(
            f"@{fn.name} consumes {deepest + 1} chain levels but the "
            f"modulus chain only has {top + 1}"
        )

    scale: dict[int, int] = {}

    def of(v) -> int:
        return scale.get(v.uid, 1)

    erase = []
    for site in mgmt.function_sites(fn):
        src = [of(v) for v in site.secret_in]
        result = site.result
        if site.kind == "mgmt.mod_reduce":
            level = top - drops[site.secret_in[0].uid]
            scale[result.uid] = (src[0] * pow(params.moduli[level], -1, t)) % t
        elif site.kind == "mgmt.adjust_scale":
            fixed = site.op.attributes.get("scale")
            if fixed is not None:
                scale[result.uid] = (src[0] * int(fixed)) % t
                continue
            target = _other_operand_scale(fn, result, scale)
            factor = (target * pow(src[0], -1, t)) % t
            if factor == 1:
                erase.append(site.op)
                scale[result.uid] = src[0]
            else:
                site.op.attributes["scale"] = factor
                scale[result.uid] = target
        elif site.is_ct_ct(mgmt._MUL_OPS):
            out = 1
            for s in src:
                out = (out * s) % t
            scale[result.uid] = out
        elif site.is_ct_ct(mgmt._ADD_SUB_OPS):
            if len(set(src)) > 1:
                raise IrError(
                    f"addition in @{fn.name} mixes scales {sorted(set(src))}; "
                    "maintenance insertion should have placed an adjustment"
                )
            scale[result.uid] = src[0]
        else:
            scale[result.uid] = src[0] if src else 1

    for op in erase:
        replace_uses(fn, op.results[0], op.operands[0])
        fn.body.ops.remove(op)

    ret = mgmt._return_op(fn)
    if ret is None:
        return
    for i, v in enumerate(ret.operands):
        if i >= len(fn.res_attrs):
            break
        if isinstance(v.type, SecretType) and of(v) != 1:
            fn.res_attrs[i][RESULT_SCALE_ATTR] = of(v)
        else:
            fn.res_attrs[i].pop(RESULT_SCALE_ATTR, None)


def _other_operand_scale(fn: Function, adjusted: "Value", scale: dict) -> int:
    """Scale the placeholder must reach: that of its consumer's other operand."""
    for op in fn.body.ops:
        if adjusted in op.operands:
            others = [v for v in op.operands if v is not adjusted]
            if not others:
                break
            return scale.get(others[0].uid, 1)
    raise IrError("dangling scale-adjustment placeholder")


@register_pass("populate-scale")
def _populate_scale_pass(module: IrModule) -> IrModule:
    return populate_scale(module)
