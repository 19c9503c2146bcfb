"""Pre-lowering rewrites: branch multiplexing, static loop bounds, loop
unrolling, arithmetic tree balancing, and straight-line batching."""
from __future__ import annotations

import math

from .ir.clone import clone_op
from .ir.passes import register_pass
from .ir.registry import lookup
from .ir.types import (
    Block,
    Function,
    I1,
    INDEX,
    IndexType,
    IrError,
    IrModule,
    Operation,
    Value,
    replace_uses,
)
from .secret import SecretnessMap, analyze_secretness

# ---------------------------------------------------------------------------
# convert-if-to-select
# ---------------------------------------------------------------------------


def _region_pure(block: Block) -> bool:
    for op in block.ops:
        spec = lookup(op.name)
        if spec is None:
            return False
        if not spec.pure and not spec.terminator:
            return False
        if not all(_region_pure(b) for b in op.regions):
            return False
    return True


def convert_if_to_select(module: IrModule) -> None:
    smap = analyze_secretness(module)
    for fn in module.functions:
        _ifs_in_block(fn.body, smap)


def _ifs_in_block(block: Block, smap: SecretnessMap) -> None:
    new_ops: list[Operation] = []
    for op in block.ops:
        for region in op.regions:
            _ifs_in_block(region, smap)
        if op.name != "scf.if" or not smap.is_secret(op.operands[0]):
            new_ops.append(op)
            continue
        then_block, else_block = op.regions
        for which, b in (("then", then_block), ("else", else_block)):
            if not _region_pure(b):
                raise IrError(
                    f"cannot multiplex scf.if: {which} branch has side effects"
                )
        cond = op.operands[0]
        new_ops.extend(then_block.ops[:-1])
        new_ops.extend(else_block.ops[:-1])
        then_vals = then_block.ops[-1].operands
        else_vals = else_block.ops[-1].operands
        for result, tv, ev in zip(op.results, then_vals, else_vals):
            sel = Operation(
                "arith.select", operands=[cond, tv, ev], results=[result]
            )
            new_ops.append(sel)
        # results keep their Value identity, so no use rewriting is needed
        op.results = []
    block.ops = new_ops


# ---------------------------------------------------------------------------
# convert-secret-for-to-static-for
# ---------------------------------------------------------------------------


def convert_secret_for_to_static_for(module: IrModule) -> None:
    for fn in module.functions:
        _fors_in_block(fn, fn.body)


def _fors_in_block(fn: Function, block: Block) -> None:
    new_ops: list[Operation] = []
    for op in block.ops:
        for region in op.regions:
            _fors_in_block(fn, region)
        if op.name != "scf.for":
            new_ops.append(op)
            continue
        new_ops.extend(_staticize_for(fn, op))
    block.ops = new_ops


def _staticize_for(fn: Function, loop: Operation) -> list[Operation]:
    bound = loop.operands[0]
    upper = loop.attributes.get("upper")
    if upper is None:
        raise IrError(
            f"@{fn.name}: scf.for has a data-dependent bound and no static "
            "'upper' annotation"
        )
    if not isinstance(upper, int) or upper < 1:
        raise IrError(f"@{fn.name}: scf.for 'upper' must be a positive integer")

    old_block = loop.regions[0]
    inits = loop.operands[1:]
    new_block = Block()
    induction = Value(INDEX)
    new_block.args.append(induction)
    iter_args = [Value(v.type) for v in inits]
    new_block.args.extend(iter_args)

    mapping = {id(old_block.args[0]): induction}
    for old_arg, new_arg in zip(old_block.args[1:], iter_args):
        mapping[id(old_arg)] = new_arg
    for op in old_block.ops[:-1]:
        new_block.ops.append(clone_op(op, mapping))
    yielded = [mapping.get(id(v), v) for v in old_block.ops[-1].operands]

    # gate: keep the new value only while induction < original bound
    if isinstance(bound.type, IndexType):
        lhs = induction
    else:
        cast = Operation(
            "arith.index_cast", operands=[induction], results=[Value(bound.type)]
        )
        new_block.ops.append(cast)
        lhs = cast.results[0]
    cmp = Operation(
        "arith.cmpi",
        operands=[lhs, bound],
        results=[Value(I1)],
        attributes={"pred": "slt"},
    )
    new_block.ops.append(cmp)
    selected = []
    for new_v, carried in zip(yielded, iter_args):
        sel = Operation(
            "arith.select",
            operands=[cmp.results[0], new_v, carried],
            results=[Value(new_v.type)],
        )
        new_block.ops.append(sel)
        selected.append(sel.results[0])
    new_block.ops.append(Operation("affine.yield", operands=selected))

    static = Operation(
        "affine.for",
        operands=list(inits),
        results=loop.results,
        attributes={"lower": 0, "upper": upper, "step": 1},
        regions=[new_block],
    )
    loop.results = []
    return [static]


# ---------------------------------------------------------------------------
# unroll-loops
# ---------------------------------------------------------------------------


def unroll_loops(module: IrModule, factor: int | str = "full") -> None:
    if factor != "full" and (not isinstance(factor, int) or factor < 1):
        raise IrError(f"unroll factor must be a positive integer or 'full', got {factor!r}")
    for fn in module.functions:
        _unroll_in_block(fn, fn.body, factor)


def _constant_trip(fn: Function, bound: Value) -> int | None:
    for op in fn.walk():
        if op.name == "arith.constant" and op.results[0] is bound:
            return op.attributes["value"]
    return None


def _as_static_loop(fn: Function, op: Operation):
    """(lower, upper, step, inits) for affine.for or constant-bound scf.for."""
    if op.name == "affine.for":
        return (
            op.attributes["lower"],
            op.attributes["upper"],
            op.attributes.get("step", 1),
            list(op.operands),
        )
    if op.name == "scf.for":
        trip = _constant_trip(fn, op.operands[0])
        if trip is not None:
            return 0, trip, 1, list(op.operands[1:])
    return None


def _unroll_in_block(fn: Function, block: Block, factor) -> None:
    new_ops: list[Operation] = []
    for op in block.ops:
        for region in op.regions:
            _unroll_in_block(fn, region, factor)
        static = _as_static_loop(fn, op) if op.name in ("affine.for", "scf.for") else None
        if static is None:
            new_ops.append(op)
            continue
        lower, upper, step, inits = static
        trip = len(range(lower, upper, step))
        if factor == "full" or factor >= trip:
            new_ops.extend(_unroll_full(fn, op, lower, upper, step, inits))
        elif factor == 1 or op.name == "scf.for":
            new_ops.append(op)
        else:
            new_ops.append(_unroll_partial(fn, op, factor, trip, step))
    block.ops = new_ops


def _unroll_full(
    fn: Function, loop: Operation, lower: int, upper: int, step: int, inits: list[Value]
) -> list[Operation]:
    block = loop.regions[0]
    carried = list(inits)
    out: list[Operation] = []
    for i in range(lower, upper, step):
        mapping: dict[int, Value] = {}
        const = Operation(
            "arith.constant", attributes={"value": i}, results=[Value(INDEX)]
        )
        out.append(const)
        mapping[id(block.args[0])] = const.results[0]
        for barg, cur in zip(block.args[1:], carried):
            mapping[id(barg)] = cur
        for op in block.ops[:-1]:
            out.append(clone_op(op, mapping))
        carried = [mapping.get(id(v), v) for v in block.ops[-1].operands]
    for result, final in zip(loop.results, carried):
        replace_uses(fn, result, final)
    loop.results = []
    return out


def _unroll_partial(
    fn: Function, loop: Operation, factor: int, trip: int, step: int
) -> Operation:
    if trip % factor != 0:
        raise IrError(
            f"@{fn.name}: unroll factor {factor} does not divide trip count {trip}"
        )
    old_block = loop.regions[0]
    new_block = Block()
    induction = Value(INDEX)
    new_block.args.append(induction)
    carried = [Value(v.type) for v in loop.operands]
    new_block.args.extend(carried)

    current = list(carried)
    for j in range(factor):
        mapping: dict[int, Value] = {}
        if j == 0:
            mapping[id(old_block.args[0])] = induction
        else:
            offset = Operation(
                "arith.constant", attributes={"value": j * step}, results=[Value(INDEX)]
            )
            new_block.ops.append(offset)
            shifted = Operation(
                "arith.add",
                operands=[induction, offset.results[0]],
                results=[Value(INDEX)],
            )
            new_block.ops.append(shifted)
            mapping[id(old_block.args[0])] = shifted.results[0]
        for barg, cur in zip(old_block.args[1:], current):
            mapping[id(barg)] = cur
        for op in old_block.ops[:-1]:
            new_block.ops.append(clone_op(op, mapping))
        current = [mapping.get(id(v), v) for v in old_block.ops[-1].operands]
    new_block.ops.append(Operation("affine.yield", operands=current))

    return Operation(
        "affine.for",
        operands=list(loop.operands),
        results=loop.results,
        attributes={
            "lower": loop.attributes["lower"],
            "upper": loop.attributes["upper"],
            "step": step * factor,
        },
        regions=[new_block],
    )


# ---------------------------------------------------------------------------
# operation-balancer
# ---------------------------------------------------------------------------

_BALANCE_EXACT = {"arith.add", "arith.mul"}
_BALANCE_FAST = {"arith.addf", "arith.mulf", "arith.maximumf"}


def operation_balancer(module: IrModule, fast_math: bool = False) -> None:
    names = _BALANCE_EXACT | (_BALANCE_FAST if fast_math else set())
    for fn in module.functions:
        _balance_in_block(fn, fn.body, names)


def tree_depth(fn: Function, value: Value) -> int:
    """Operation depth of the def tree rooted at `value` (args count 0)."""
    defs = {}
    for op in fn.walk():
        for r in op.results:
            defs[id(r)] = op

    def depth(v: Value) -> int:
        op = defs.get(id(v))
        if op is None or not op.operands:
            return 0
        return 1 + max(depth(x) for x in op.operands)

    return depth(value)


def _balance_in_block(fn: Function, block: Block, names: set[str]) -> None:
    for op in block.ops:
        for region in op.regions:
            _balance_in_block(fn, region, names)

    uses: dict[int, int] = {}
    for op in fn.walk():
        for v in op.operands:
            uses[id(v)] = uses.get(id(v), 0) + 1
    def_in_block = {
        id(op.results[0]): op for op in block.ops if len(op.results) == 1
    }

    absorbed: set[int] = set()

    def leaves(op: Operation) -> list[Value]:
        out: list[Value] = []
        for v in op.operands:
            d = def_in_block.get(id(v))
            if (
                d is not None
                and d.name == op.name
                and uses.get(id(v), 0) == 1
                and id(d) not in absorbed
            ):
                out.extend(leaves(d))
            else:
                out.append(v)
        return out

    for pos in range(len(block.ops) - 1, -1, -1):
        root = block.ops[pos]
        if root.name not in names or id(root) in absorbed:
            continue
        tree_leaves = leaves(root)
        if len(tree_leaves) < 3:
            continue
        # mark interior ops absorbed
        def interior(op: Operation):
            for v in op.operands:
                d = def_in_block.get(id(v))
                if (
                    d is not None
                    and d.name == op.name
                    and uses.get(id(v), 0) == 1
                    and d is not root
                    and id(d) not in absorbed
                ):
                    absorbed.add(id(d))
                    interior(d)

        interior(root)
        # rebuild a balanced tree over the ordered leaves
        level = tree_leaves
        new_ops: list[Operation] = []
        while len(level) > 1:
            nxt: list[Value] = []
            for i in range(0, len(level) - 1, 2):
                node = Operation(
                    root.name,
                    operands=[level[i], level[i + 1]],
                    results=[Value(level[i].type)],
                )
                new_ops.append(node)
                nxt.append(node.results[0])
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        # the top node reuses the root's result Value
        top = new_ops[-1]
        top.results = root.results
        block.ops[pos : pos + 1] = new_ops

    if absorbed:
        block.ops = [op for op in block.ops if id(op) not in absorbed]


# ---------------------------------------------------------------------------
# straight-line-vectorizer
# ---------------------------------------------------------------------------

_BATCHABLE = {
    "arith.add",
    "arith.sub",
    "arith.mul",
    "arith.addf",
    "arith.subf",
    "arith.mulf",
    "arith.maximumf",
}


class _OpenBatch:
    def __init__(self, key):
        self.key = key
        self.members: list[Operation] = []
        self.result_ids: set[int] = set()

    def add(self, op: Operation) -> None:
        self.members.append(op)
        self.result_ids.update(id(r) for r in op.results)


def straight_line_vectorizer(module: IrModule, max_batch: int = 8) -> None:
    if not isinstance(max_batch, int) or max_batch < 1:
        raise IrError(f"max_batch must be a positive integer, got {max_batch!r}")
    for fn in module.functions:
        _vectorize_block(fn, fn.body, max_batch)


def _vectorize_block(fn: Function, block: Block, max_batch: int) -> None:
    for op in block.ops:
        for region in op.regions:
            _vectorize_block(fn, region, max_batch)

    new_ops: list[Operation] = []
    open_batches: dict[tuple, _OpenBatch] = {}

    def finalize(batch: _OpenBatch) -> None:
        if len(batch.members) == 1:
            new_ops.append(batch.members[0])
            return
        width = len(batch.members)
        batched = Operation(
            "parallel.batch",
            attributes={"inner": batch.members[0].name, "width": width},
        )
        for member in batch.members:
            batched.operands.extend(member.operands)
        for member in batch.members:
            for r in member.results:
                nr = Value(r.type)
                batched.results.append(nr)
                replace_uses(fn, r, nr)
        new_ops.append(batched)

    def flush_dependents(used_ids: set[int]) -> None:
        for key in list(open_batches):
            if open_batches[key].result_ids & used_ids:
                finalize(open_batches.pop(key))

    for op in block.ops:
        used: set[int] = set()
        for inner in op.walk():
            used.update(id(v) for v in inner.operands)
        flush_dependents(used)
        if (
            op.name not in _BATCHABLE
            or op.regions
            or len(op.results) != 1
        ):
            new_ops.append(op)
            continue
        key = (
            op.name,
            tuple(str(v.type) for v in op.operands),
            str(op.results[0].type),
        )
        batch = open_batches.get(key)
        if batch is None:
            batch = open_batches[key] = _OpenBatch(key)
        batch.add(op)
        if len(batch.members) >= max_batch:
            finalize(open_batches.pop(key))
    for batch in open_batches.values():
        finalize(batch)
    block.ops = new_ops


# ---------------------------------------------------------------------------
# pass registrations
# ---------------------------------------------------------------------------


@register_pass("convert-if-to-select")
def _if_to_select_pass(module: IrModule) -> None:
    convert_if_to_select(module)


@register_pass("convert-secret-for-to-static-for")
def _static_for_pass(module: IrModule) -> None:
    convert_secret_for_to_static_for(module)


@register_pass("unroll-loops")
def _unroll_pass(module: IrModule, factor="full") -> None:
    unroll_loops(module, factor)


@register_pass("operation-balancer")
def _balancer_pass(module: IrModule, fast_math: bool = False) -> None:
    operation_balancer(module, fast_math)


@register_pass("straight-line-vectorizer")
def _vectorizer_pass(module: IrModule, max_batch: int = 8) -> None:
    straight_line_vectorizer(module, max_batch)
