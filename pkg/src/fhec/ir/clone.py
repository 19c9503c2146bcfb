"""Deep-copying of ops and blocks with value remapping."""
from __future__ import annotations

from .types import Block, Operation, Value


def clone_op(op: Operation, mapping: dict[int, Value]) -> Operation:
    """Copy an op (and its regions), looking operands up in `mapping`.

    Results get fresh Values which are entered into `mapping` so later
    clones see them. Values absent from the mapping are shared, which is
    how references to the enclosing scope stay intact.
    """
    new = Operation(
        op.name,
        operands=[mapping.get(id(v), v) for v in op.operands],
        attributes=dict(op.attributes),
    )
    for r in op.results:
        nr = Value(r.type)
        mapping[id(r)] = nr
        new.results.append(nr)
    for block in op.regions:
        new.regions.append(clone_block(block, mapping))
    return new


def clone_block(block: Block, mapping: dict[int, Value]) -> Block:
    new = Block()
    for arg in block.args:
        na = Value(arg.type)
        mapping[id(arg)] = na
        new.args.append(na)
    for op in block.ops:
        new.ops.append(clone_op(op, mapping))
    return new
