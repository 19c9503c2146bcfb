"""Rebuild whole-tensor structure from unrolled element-level code.

`tensorize-reductions` recognizes two shapes left behind by loop unrolling:

* a tree of adds (or muls) whose leaves extract every element of one tensor
  exactly once — optionally through one elementwise op per element, as in a
  dot product — becomes `tensor_ext.reduce` (over a whole-tensor op);
* a chain of inserts writing ``f(a[i], b[i])`` to every index of a tensor
  becomes the whole-tensor op ``f(a, b)``.

`rotate-and-reduce` then lowers each reduce over a power-of-two length n to
log2(n) rotate-and-combine steps, leaving the total in every slot, plus one
extract (marked replicated) to read it back as a scalar.  Non-power-of-two
lengths fall back to an extract/combine chain with a warning.
"""
from __future__ import annotations

import warnings

from ..ir.passes import register_pass
from ..ir.registry import lookup
from ..ir.types import (
    INDEX,
    Block,
    Function,
    IrModule,
    Operation,
    TensorType,
    Value,
    is_float_like,
    replace_uses,
)
from ..ir.cleanup import dce

_TREE_OPS = {"arith.add": "add", "arith.mul": "mul", "arith.addf": "add", "arith.mulf": "mul"}
_LEAF_OPS = {"arith.add", "arith.sub", "arith.mul", "arith.addf", "arith.subf", "arith.mulf"}


def _blocks(fn: Function):
    yield fn.body
    for op in fn.walk():
        yield from op.regions


def _use_counts(fn: Function) -> dict[int, int]:
    counts: dict[int, int] = {}
    for op in fn.walk():
        for v in op.operands:
            counts[id(v)] = counts.get(id(v), 0) + 1
    return counts


def _index_constant(block_ops: list[Operation], value: Value):
    for op in block_ops:
        if op.name == "arith.constant" and op.results[0] is value:
            if value.type == INDEX:
                return op.attributes.get("value")
    return None


class _BlockMatcher:
    def __init__(self, fn: Function, block: Block):
        self.fn = fn
        self.block = block
        self.producer = {id(op.results[0]): op for op in block.ops if len(op.results) == 1}
        self.uses = _use_counts(fn)

    def local(self, value: Value) -> Operation | None:
        return self.producer.get(id(value))

    def single_use(self, value: Value) -> bool:
        return self.uses.get(id(value), 0) == 1

    def const_index(self, value: Value):
        op = self.local(value)
        if op is not None and op.name == "arith.constant" and value.type == INDEX:
            return op.attributes.get("value")
        return None

    # -- reduction trees -----------------------------------------------------

    def tree_leaves(self, root: Operation) -> list[Value] | None:
        """Operand values of a single-use tree of `root.name` ops."""
        leaves: list[Value] = []
        stack = [root]
        while stack:
            op = stack.pop()
            for v in op.operands:
                child = self.local(v)
                if child is not None and child.name == root.name and self.single_use(v):
                    stack.append(child)
                else:
                    leaves.append(v)
        return leaves

    def leaf_shape(self, value: Value):
        """Describe a reduction leaf: ('extract', src, i) or (opname, a, b, i)."""
        op = self.local(value)
        if op is None or not self.single_use(value):
            return None
        if op.name == "tensor.extract":
            i = self.const_index(op.operands[1])
            if i is None:
                return None
            return ("extract", op.operands[0], None, i)
        if op.name in _LEAF_OPS:
            sides = []
            for v in op.operands:
                sub = self.local(v)
                if (
                    sub is None
                    or sub.name != "tensor.extract"
                    or not self.single_use(v)
                ):
                    return None
                i = self.const_index(sub.operands[1])
                if i is None:
                    return None
                sides.append((sub.operands[0], i))
            if len(sides) != 2 or sides[0][1] != sides[1][1]:
                return None
            return (op.name, sides[0][0], sides[1][0], sides[0][1])
        return None

    def match_reduction(self, root: Operation):
        kind = _TREE_OPS.get(root.name)
        if kind is None:
            return None
        leaves = self.tree_leaves(root)
        if leaves is None or len(leaves) < 2:
            return None
        shapes = [self.leaf_shape(v) for v in leaves]
        if any(s is None for s in shapes):
            return None
        first = shapes[0]
        if any(s[0] != first[0] or s[1] is not first[1] or s[2] is not first[2] for s in shapes):
            return None
        src = first[1]
        if not isinstance(src.type, TensorType) or len(src.type.shape) != 1:
            return None
        n = src.type.shape[0]
        indices = sorted(s[3] for s in shapes)
        if indices != list(range(n)):
            return None
        return kind, first, n

    def rewrite_reduction(self, root: Operation, kind: str, leaf, n: int) -> None:
        shape_op, a, b, _ = leaf
        position = self.block.ops.index(root)
        new_ops: list[Operation] = []
        if shape_op == "extract":
            source = a
        else:
            elementwise = Operation(
                shape_op,
                operands=[a, b],
                results=[Value(a.type)],
            )
            new_ops.append(elementwise)
            source = elementwise.results[0]
        reduce_op = Operation(
            "tensor_ext.reduce",
            operands=[source],
            results=[Value(root.results[0].type)],
            attributes={"kind": kind},
        )
        new_ops.append(reduce_op)
        self.block.ops[position:position] = new_ops
        replace_uses(self.fn, root.results[0], reduce_op.results[0])
        root.results = []

    # -- elementwise insert chains --------------------------------------------

    def match_insert_chain(self, last: Operation):
        """Chain of inserts covering every index with the same elementwise op."""
        if last.name != "tensor.insert":
            return None
        t = last.results[0].type
        if not isinstance(t, TensorType) or len(t.shape) != 1:
            return None
        n = t.shape[0]
        writes: dict[int, Value] = {}
        chain: list[Operation] = []
        op = last
        while True:
            i = self.const_index(op.operands[2])
            if i is None or i in writes:
                return None
            writes[i] = op.operands[0]
            chain.append(op)
            prev = self.local(op.operands[1])
            if prev is not None and prev.name == "tensor.insert":
                if not self.single_use(op.operands[1]):
                    return None
                op = prev
                continue
            break
        if sorted(writes) != list(range(n)):
            return None
        shapes = [self.leaf_shape(writes[i]) for i in range(n)]
        if any(s is None or s[0] == "extract" for s in shapes):
            return None
        first = shapes[0]
        if any(
            s[0] != first[0] or s[1] is not first[1] or s[2] is not first[2] or s[3] != i
            for i, s in enumerate(shapes)
        ):
            return None
        return first, chain

    def rewrite_insert_chain(self, last: Operation, leaf, chain: list[Operation]) -> None:
        opname, a, b, _ = leaf
        position = self.block.ops.index(last)
        new_op = Operation(
            opname,
            operands=[a, b],
            results=[Value(last.results[0].type)],
        )
        self.block.ops.insert(position, new_op)
        replace_uses(self.fn, last.results[0], new_op.results[0])
        for op in chain:
            op.results = []


def tensorize_reductions(module: IrModule) -> None:
    for fn in module.functions:
        changed = True
        while changed:
            changed = False
            for block in list(_blocks(fn)):
                matcher = _BlockMatcher(fn, block)
                for op in list(block.ops):
                    if not op.results:
                        continue
                    hit = matcher.match_reduction(op)
                    if hit is not None:
                        matcher.rewrite_reduction(op, *hit)
                        changed = True
                        break
                    chain = matcher.match_insert_chain(op)
                    if chain is not None:
                        matcher.rewrite_insert_chain(op, *chain)
                        changed = True
                        break
                if changed:
                    break
    dce(module)


# ---------------------------------------------------------------------------
# rotate-and-reduce
# ---------------------------------------------------------------------------


def _combine_name(kind: str, element) -> str:
    if is_float_like(element):
        return "arith.addf" if kind == "add" else "arith.mulf"
    return "arith.add" if kind == "add" else "arith.mul"


def rotate_and_reduce(module: IrModule) -> None:
    for fn in module.functions:
        for block in list(_blocks(fn)):
            for op in list(block.ops):
                if op.name != "tensor_ext.reduce":
                    continue
                _lower_reduce(fn, block, op)
    dce(module)


def _lower_reduce(fn: Function, block: Block, reduce_op: Operation) -> None:
    source = reduce_op.operands[0]
    n = source.type.shape[0]
    kind = reduce_op.attributes["kind"]
    combine = _combine_name(kind, reduce_op.results[0].type)
    position = block.ops.index(reduce_op)
    new_ops: list[Operation] = []

    if n & (n - 1):  # not a power of two: elementwise fallback
        warnings.warn(
            f"reduce over tensor<{n}> is not a power of two; "
            "falling back to an extract/combine chain",
            stacklevel=2,
        )
        acc = None
        for i in range(n):
            c = Operation("arith.constant", results=[Value(INDEX)], attributes={"value": i})
            e = Operation(
                "tensor.extract",
                operands=[source, c.results[0]],
                results=[Value(source.type.element)],
            )
            new_ops += [c, e]
            if acc is None:
                acc = e.results[0]
            else:
                comb = Operation(combine, operands=[acc, e.results[0]], results=[Value(acc.type)])
                new_ops.append(comb)
                acc = comb.results[0]
        result = acc
    else:
        x = source
        k = n // 2
        while k >= 1:
            rot = Operation(
                "tensor_ext.rotate",
                operands=[x],
                results=[Value(x.type)],
                attributes={"amount": k},
            )
            comb = Operation(combine, operands=[x, rot.results[0]], results=[Value(x.type)])
            new_ops += [rot, comb]
            x = comb.results[0]
            k //= 2
        zero = Operation("arith.constant", results=[Value(INDEX)], attributes={"value": 0})
        extract = Operation(
            "tensor.extract",
            operands=[x, zero.results[0]],
            results=[Value(source.type.element)],
            attributes={"replicated": True},
        )
        new_ops += [zero, extract]
        result = extract.results[0]

    block.ops[position:position] = new_ops
    replace_uses(fn, reduce_op.results[0], result)
    reduce_op.results = []
    block.ops.remove(reduce_op)


@register_pass("tensorize-reductions")
def _tensorize_pass(module: IrModule) -> None:
    tensorize_reductions(module)


@register_pass("rotate-and-reduce")
def _rotate_and_reduce_pass(module: IrModule) -> None:
    rotate_and_reduce(module)


__all__ = ["tensorize_reductions", "rotate_and_reduce", "lookup"]
