"""Secrecy tracking: wrapping computations in secret regions, secretness
dataflow analysis, one-op-per-region splitting, and plaintext hoisting."""
from __future__ import annotations

from .ir.passes import register_pass
from .ir.registry import lookup
from .ir.types import (
    Block,
    Function,
    IrError,
    IrModule,
    Operation,
    SecretType,
    Value,
    replace_uses,
)

# ---------------------------------------------------------------------------
# secretness analysis
# ---------------------------------------------------------------------------


class SecretnessMap:
    """Per-Value secret/public classification (forward dataflow fixpoint)."""

    def __init__(self):
        self._secret: set[int] = set()

    def mark(self, value: Value) -> bool:
        if id(value) in self._secret:
            return False
        self._secret.add(id(value))
        return True

    def is_secret(self, value: Value) -> bool:
        return id(value) in self._secret or isinstance(value.type, SecretType)


def analyze_secretness(module: IrModule) -> SecretnessMap:
    smap = SecretnessMap()
    for fn in module.functions:
        for arg in fn.args:
            if isinstance(arg.type, SecretType) or fn.arg_attrs[
                fn.args.index(arg)
            ].get("secret.secret"):
                smap.mark(arg)
        changed = True
        while changed:
            changed = False
            for op in fn.walk():
                changed |= _transfer(op, smap)
    return smap


def _transfer(op: Operation, smap: SecretnessMap) -> bool:
    changed = False
    if op.name == "secret.generic":
        for barg, operand in zip(op.regions[0].args, op.operands):
            if smap.is_secret(operand):
                changed |= smap.mark(barg)
        for r in op.results:
            changed |= smap.mark(r)
        return changed
    if op.name == "secret.conceal":
        return smap.mark(op.results[0])
    if op.name in ("affine.for", "scf.for"):
        block = op.regions[0]
        iter_args = block.args[1:]
        inits = op.operands if op.name == "affine.for" else op.operands[1:]
        if op.name == "scf.for" and smap.is_secret(op.operands[0]):
            # data-dependent trip count taints everything the loop carries
            for v in list(iter_args) + list(op.results):
                changed |= smap.mark(v)
        for barg, init in zip(iter_args, inits):
            if smap.is_secret(init):
                changed |= smap.mark(barg)
        yield_op = block.ops[-1] if block.ops else None
        if yield_op is not None and yield_op.name.endswith("yield"):
            for barg, result, yielded in zip(iter_args, op.results, yield_op.operands):
                if smap.is_secret(yielded):
                    changed |= smap.mark(barg)
                    changed |= smap.mark(result)
        return changed
    if op.name == "scf.if":
        taint = smap.is_secret(op.operands[0])
        for block in op.regions:
            if block.ops and block.ops[-1].name == "scf.yield":
                for result, yielded in zip(op.results, block.ops[-1].operands):
                    if taint or smap.is_secret(yielded):
                        changed |= smap.mark(result)
        return changed
    # ordinary op: any secret operand taints every result
    if any(smap.is_secret(v) for v in op.operands):
        for r in op.results:
            changed |= smap.mark(r)
    return changed


# ---------------------------------------------------------------------------
# wrap-generic
# ---------------------------------------------------------------------------


def _parse_secret_args(option: str) -> dict[str, list[int]]:
    """Parse 'fn:0,1' (or 'fn:0,1;g:2') into {fn: [0, 1], g: [2]}."""
    out: dict[str, list[int]] = {}
    for chunk in option.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise IrError(f"bad secret-args entry {chunk!r}, want fn:i,j")
        name, indices = chunk.split(":", 1)
        out[name.strip()] = [int(i) for i in indices.split(",") if i.strip()]
    return out


def wrap_generic(module: IrModule, secret_args: dict[str, list[int]] | None = None) -> None:
    for fn in module.functions:
        indices = (secret_args or {}).get(fn.name)
        if indices is None:
            indices = [
                i
                for i, attrs in enumerate(fn.arg_attrs)
                if attrs.get("secret.secret")
            ]
        _wrap_function(fn, indices)


def _wrap_function(fn: Function, indices: list[int]) -> None:
    for i in indices:
        if not 0 <= i < len(fn.args):
            raise IrError(
                f"@{fn.name}: secret argument index {i} out of range "
                f"(function has {len(fn.args)} args)"
            )
        if isinstance(fn.args[i].type, SecretType):
            raise IrError(f"@{fn.name}: argument {i} is already secret")
    for op in fn.walk():
        if op.name.startswith("secret."):
            raise IrError(f"@{fn.name}: already contains secret ops")
    if not indices:
        return

    body_ops = fn.body.ops
    ret = body_ops[-1]
    if ret.name != "return":
        raise IrError(f"@{fn.name}: body must end in return")

    region = Block()
    generic = Operation("secret.generic", regions=[region])
    for i in indices:
        arg = fn.args[i]
        inner_arg = Value(arg.type)
        arg.type = SecretType(arg.type)
        fn.arg_attrs[i].pop("secret.secret", None)
        generic.operands.append(arg)
        region.args.append(inner_arg)
        _replace_in_ops(body_ops, arg, inner_arg)

    region.ops = body_ops[:-1]
    yield_op = Operation("secret.yield", operands=list(ret.operands))
    region.ops.append(yield_op)

    new_ret = Operation("return")
    for idx, v in enumerate(ret.operands):
        res = Value(SecretType(v.type))
        generic.results.append(res)
        new_ret.operands.append(res)
        fn.result_types[idx] = SecretType(fn.result_types[idx])
    fn.body = Block(ops=[generic, new_ret])


def _replace_in_ops(ops: list[Operation], old: Value, new: Value) -> None:
    for op in ops:
        for i, v in enumerate(op.operands):
            if v is old:
                op.operands[i] = new
        for block in op.regions:
            _replace_in_ops(block.ops, old, new)


# ---------------------------------------------------------------------------
# distribute-generic
# ---------------------------------------------------------------------------


def distribute_generic(module: IrModule) -> None:
    for fn in module.functions:
        new_ops: list[Operation] = []
        for op in fn.body.ops:
            if op.name != "secret.generic":
                new_ops.append(op)
                continue
            new_ops.extend(_split_generic(fn, op))
        fn.body.ops = new_ops


def _split_generic(fn: Function, generic: Operation) -> list[Operation]:
    region = generic.regions[0]
    inner_ops = region.ops[:-1]
    yield_op = region.ops[-1]
    for op in inner_ops:
        if op.regions:
            raise IrError(
                f"@{fn.name}: secret.generic contains region op {op.name}; "
                "run loop conversion/unrolling passes first"
            )
    if len(inner_ops) <= 1:
        return [generic]

    # secret value visible outside the region, keyed by inner value id
    outer_secret: dict[int, Value] = {
        id(barg): operand for barg, operand in zip(region.args, generic.operands)
    }
    out: list[Operation] = []
    for op in inner_ops:
        secret_operands = [v for v in op.operands if id(v) in outer_secret]
        if not secret_operands and lookup(op.name).pure:
            out.append(op)  # stays public; hoisted straight out
            continue
        block = Block()
        rewritten = {}
        small = Operation(op.name, attributes=op.attributes, results=op.results)
        operands_out: list[Value] = []
        for v in op.operands:
            if id(v) in outer_secret:
                if id(v) not in rewritten:
                    barg = Value(v.type)
                    block.args.append(barg)
                    operands_out.append(outer_secret[id(v)])
                    rewritten[id(v)] = barg
                small.operands.append(rewritten[id(v)])
            else:
                small.operands.append(v)
        block.ops.append(small)
        block.ops.append(Operation("secret.yield", operands=list(op.results)))
        wrapper = Operation(
            "secret.generic", operands=operands_out, regions=[block]
        )
        for r in op.results:
            res = Value(SecretType(r.type))
            wrapper.results.append(res)
            outer_secret[id(r)] = res
        out.append(wrapper)

    for old_result, yielded in zip(generic.results, yield_op.operands):
        if id(yielded) in outer_secret:
            replace_uses(fn, old_result, outer_secret[id(yielded)])
        else:
            conceal = Operation(
                "secret.conceal",
                operands=[yielded],
                results=[Value(SecretType(yielded.type))],
            )
            out.append(conceal)
            replace_uses(fn, old_result, conceal.results[0])
    return out


# ---------------------------------------------------------------------------
# hoist-plaintext
# ---------------------------------------------------------------------------


def hoist_plaintext(module: IrModule) -> None:
    smap = analyze_secretness(module)
    for fn in module.functions:
        new_ops: list[Operation] = []
        for op in fn.body.ops:
            if op.name != "secret.generic":
                new_ops.append(op)
                continue
            new_ops.extend(_hoist_from_generic(fn, op, smap))
        fn.body.ops = new_ops


def _hoist_from_generic(
    fn: Function, generic: Operation, smap: SecretnessMap
) -> list[Operation]:
    region = generic.regions[0]
    hoisted: list[Operation] = []
    changed = True
    while changed:
        changed = False
        for op in list(region.ops[:-1]):
            spec = lookup(op.name)
            if spec is None or not spec.pure or op.regions:
                continue
            if any(smap.is_secret(v) for v in op.operands):
                continue
            region.ops.remove(op)
            hoisted.append(op)
            changed = True

    yield_op = region.ops[-1]
    if len(region.ops) == 1:
        # everything hoisted: forward results through conceal / operands
        out = list(hoisted)
        inner_of = {id(b): o for b, o in zip(region.args, generic.operands)}
        for old_result, yielded in zip(generic.results, yield_op.operands):
            if id(yielded) in inner_of:
                replace_uses(fn, old_result, inner_of[id(yielded)])
            else:
                conceal = Operation(
                    "secret.conceal",
                    operands=[yielded],
                    results=[Value(SecretType(yielded.type))],
                )
                out.append(conceal)
                replace_uses(fn, old_result, conceal.results[0])
        return out
    return hoisted + [generic]


# ---------------------------------------------------------------------------
# pass registrations
# ---------------------------------------------------------------------------


@register_pass("wrap-generic")
def _wrap_generic_pass(module: IrModule, secret_args: str | None = None) -> None:
    parsed = _parse_secret_args(secret_args) if secret_args else None
    wrap_generic(module, parsed)


@register_pass("distribute-generic")
def _distribute_pass(module: IrModule) -> None:
    distribute_generic(module)


@register_pass("hoist-plaintext")
def _hoist_pass(module: IrModule) -> None:
    hoist_plaintext(module)
