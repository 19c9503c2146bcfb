"""Scalar cleanup passes: constant folding, identities, CSE, dead-code removal."""
from __future__ import annotations

import math
from typing import Any

from .passes import register_pass
from .registry import lookup
from .types import Block, Function, IrModule, Operation, TensorType, replace_uses

# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _blocks(fn: Function):
    """All blocks in a function, outermost first."""
    out = [fn.body]
    i = 0
    while i < len(out):
        for op in out[i].ops:
            out.extend(op.regions)
        i += 1
    return out


def _const_map(fn: Function) -> dict[int, Any]:
    consts: dict[int, Any] = {}
    for op in fn.walk():
        if op.name == "arith.constant":
            consts[id(op.results[0])] = op.attributes.get("value")
    return consts


def _is_all(value, scalar) -> bool:
    if isinstance(value, list):
        return all(v == scalar for v in value)
    return value == scalar


def _freeze(obj) -> Any:
    if isinstance(obj, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in obj.items()))
    if isinstance(obj, list):
        return tuple(_freeze(v) for v in obj)
    return obj


def _num_elements(t: TensorType) -> int:
    return math.prod(t.shape)


# ---------------------------------------------------------------------------
# constant folding + algebraic identities
# ---------------------------------------------------------------------------

_INT_BINOPS = {
    "arith.add": lambda a, b: a + b,
    "arith.sub": lambda a, b: a - b,
    "arith.mul": lambda a, b: a * b,
}

_CMP = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "slt": lambda a, b: a < b,
    "sle": lambda a, b: a <= b,
    "sgt": lambda a, b: a > b,
    "sge": lambda a, b: a >= b,
}


def _elementwise(f, a, b):
    if isinstance(a, list) or isinstance(b, list):
        if not isinstance(a, list):
            a = [a] * len(b)
        if not isinstance(b, list):
            b = [b] * len(a)
        return [f(x, y) for x, y in zip(a, b)]
    return f(a, b)


def _become_constant(op: Operation, value) -> None:
    """Rewrite `op` in place into arith.constant, keeping its result Value."""
    op.name = "arith.constant"
    op.operands = []
    op.attributes = {"value": value}
    op.regions = []


def _fold_block(fn: Function, block: Block, consts: dict[int, Any]) -> bool:
    changed = False
    for op in list(block.ops):
        for region in op.regions:
            changed |= _fold_block(fn, region, consts)
        if len(op.results) != 1:
            continue

        def forward(value) -> bool:
            """Make all uses of the result refer to `value`; drop the op."""
            replace_uses(fn, op.results[0], value)
            block.ops.remove(op)
            return True

        folder = _INT_BINOPS.get(op.name)
        if folder is not None:
            a = consts.get(id(op.operands[0]))
            b = consts.get(id(op.operands[1]))
            if a is not None and b is not None:
                _become_constant(op, _elementwise(folder, a, b))
                consts[id(op.results[0])] = op.attributes["value"]
                changed = True
                continue
            # identities: x+0, 0+x, x-0, x*1, 1*x, x*0, 0*x
            if op.name == "arith.add":
                if a is not None and _is_all(a, 0):
                    changed |= forward(op.operands[1])
                elif b is not None and _is_all(b, 0):
                    changed |= forward(op.operands[0])
            elif op.name == "arith.sub":
                if b is not None and _is_all(b, 0):
                    changed |= forward(op.operands[0])
                elif op.operands[0] is op.operands[1]:
                    rt = op.results[0].type
                    zero = (
                        [0] * _num_elements(rt) if isinstance(rt, TensorType) else 0
                    )
                    _become_constant(op, zero)
                    consts[id(op.results[0])] = zero
                    changed = True
            elif op.name == "arith.mul":
                if a is not None and _is_all(a, 1):
                    changed |= forward(op.operands[1])
                elif b is not None and _is_all(b, 1):
                    changed |= forward(op.operands[0])
                elif (a is not None and _is_all(a, 0)) or (
                    b is not None and _is_all(b, 0)
                ):
                    rt = op.results[0].type
                    zero = (
                        [0] * _num_elements(rt) if isinstance(rt, TensorType) else 0
                    )
                    _become_constant(op, zero)
                    consts[id(op.results[0])] = zero
                    changed = True
            continue
        if op.name == "arith.cmpi":
            a = consts.get(id(op.operands[0]))
            b = consts.get(id(op.operands[1]))
            if a is not None and b is not None:
                _become_constant(op, int(_CMP[op.attributes["pred"]](a, b)))
                consts[id(op.results[0])] = op.attributes["value"]
                changed = True
            continue
        if op.name == "arith.select":
            c = consts.get(id(op.operands[0]))
            if c is not None:
                changed |= forward(op.operands[1 if c else 2])
            continue
        if op.name == "arith.index_cast":
            a = consts.get(id(op.operands[0]))
            if a is not None:
                _become_constant(op, a)
                consts[id(op.results[0])] = a
                changed = True
            continue
        if op.name == "tensor_ext.rotate" and op.attributes.get("amount") == 0:
            changed |= forward(op.operands[0])
            continue
        if op.name == "tensor_ext.convert_layout" and op.attributes.get(
            "from"
        ) == op.attributes.get("to"):
            changed |= forward(op.operands[0])
            continue
    return changed


@register_pass("canonicalize")
def canonicalize(module: IrModule) -> None:
    for fn in module.functions:
        while _fold_block(fn, fn.body, _const_map(fn)):
            pass


# ---------------------------------------------------------------------------
# common-subexpression elimination (per block, dominance-safe)
# ---------------------------------------------------------------------------


def _generic_key(op: Operation):
    """Structural key for one-op secret.generic bodies, or None."""
    if op.name != "secret.generic" or len(op.regions) != 1:
        return None
    block = op.regions[0]
    if len(block.ops) != 2 or block.ops[-1].name != "secret.yield":
        return None
    inner, yld = block.ops
    if lookup(inner.name) is None or not lookup(inner.name).pure or inner.regions:
        return None
    if [id(v) for v in yld.operands] != [id(r) for r in inner.results]:
        return None
    arg_index = {id(a): i for i, a in enumerate(block.args)}
    inner_sig = []
    for v in inner.operands:
        if id(v) in arg_index:
            inner_sig.append(("arg", arg_index[id(v)]))
        else:
            inner_sig.append(("outer", id(v)))
    return (
        "secret.generic",
        tuple(id(v) for v in op.operands),
        inner.name,
        _freeze(inner.attributes),
        tuple(inner_sig),
        tuple(str(r.type) for r in op.results),
    )


def _plain_key(op: Operation):
    spec = lookup(op.name)
    if spec is None or not spec.pure or op.regions:
        return None
    return (
        op.name,
        tuple(id(v) for v in op.operands),
        _freeze(op.attributes),
        tuple(str(r.type) for r in op.results),
    )


def _cse_block(fn: Function, block: Block) -> bool:
    seen: dict = {}
    changed = False
    for op in list(block.ops):
        for region in op.regions:
            changed |= _cse_block(fn, region)
        key = _generic_key(op) or _plain_key(op)
        if key is None:
            continue
        prior = seen.get(key)
        if prior is None:
            seen[key] = op
            continue
        for old, new in zip(op.results, prior.results):
            replace_uses(fn, old, new)
        block.ops.remove(op)
        changed = True
    return changed


@register_pass("cse")
def cse(module: IrModule) -> None:
    for fn in module.functions:
        _cse_block(fn, fn.body)


# ---------------------------------------------------------------------------
# dead code elimination
# ---------------------------------------------------------------------------


def _subtree_pure(op: Operation) -> bool:
    spec = lookup(op.name)
    if spec is None:
        return False
    if not spec.pure and not spec.terminator:
        return False
    return all(_subtree_pure(inner) for b in op.regions for inner in b.ops)


def _count_uses(fn: Function) -> dict[int, int]:
    uses: dict[int, int] = {}
    for op in fn.walk():
        for v in op.operands:
            uses[id(v)] = uses.get(id(v), 0) + 1
    return uses


def _sweep_block(block: Block, uses: dict[int, int]) -> bool:
    changed = False
    for pos in range(len(block.ops) - 1, -1, -1):
        op = block.ops[pos]
        spec = lookup(op.name)
        for region in op.regions:
            changed |= _sweep_block(region, uses)
        if spec is None or spec.terminator:
            continue
        if any(uses.get(id(r), 0) for r in op.results):
            continue
        if not _subtree_pure(op):
            continue
        del block.ops[pos]
        changed = True
    return changed


@register_pass("dce")
def dce(module: IrModule) -> None:
    for fn in module.functions:
        while _sweep_block(fn.body, _count_uses(fn)):
            pass


@register_pass("cleanup")
def cleanup(module: IrModule) -> None:
    canonicalize(module)
    cse(module)
    dce(module)
