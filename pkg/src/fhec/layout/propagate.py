"""Slot-layout assignment and cost-driven placement of layout conversions.

`layout-propagation` walks a distributed module (one op per secret.generic),
gives every secret value a packing layout, and materializes the glue this
forces: `tensor_ext.convert_layout` where a consumer needs an operand in a
different layout, and `tensor_ext.assign_layout` annotations on public
operands that kernels will consume as packed plaintexts.

`layout-optimizer` runs backward over the result and hoists a conversion
above its producer when the modeled cost strictly drops — typically when the
hoisted copies merge with identical conversions that already exist.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from ..ir.attributes import Layout
from ..ir.passes import register_pass
from ..ir.types import (
    Block,
    Function,
    IrError,
    IrModule,
    IrType,
    Operation,
    SecretType,
    TensorType,
    Value,
    replace_uses,
    strip_secret,
)
from . import core as layouts

# slot-pointwise ops: applying them before or after a slot permutation
# commutes, so conversions can hoist through them
POINTWISE = {
    "arith.add",
    "arith.sub",
    "arith.mul",
    "arith.addf",
    "arith.subf",
    "arith.mulf",
    "arith.maximumf",
    "arith.cmpi",
    "arith.select",
    "polynomial.eval",
}


@dataclass(frozen=True)
class CostModel:
    """Relative weights of the expensive ciphertext operations."""

    rotation: float = 1.0
    ct_ct_mul: float = 1.0
    ct_pt_mul: float = 0.2
    add: float = 0.05

    def op_cost(self, name: str, secret_operands: int) -> float:
        if name in ("arith.mul", "arith.mulf"):
            return self.ct_ct_mul if secret_operands >= 2 else self.ct_pt_mul
        if name in ("arith.add", "arith.sub", "arith.addf", "arith.subf"):
            return self.add
        if name == "tensor_ext.rotate":
            return self.rotation
        return 0.0

    def conversion_cost(self, source: Layout, target: Layout, slots: int) -> float:
        return self.rotation * len(conversion_shifts(source, target, slots))


def conversion_shifts(source: Layout, target: Layout, slots: int) -> set[int]:
    """Distinct nonzero slot shifts needed to re-lay data (cost estimate).

    Uses the canonical first copy of every data element under both layouts;
    each distinct shift amount costs at least one rotation.
    """
    a, b = source.alignment, target.alignment
    if a.in_shape != b.in_shape:
        raise IrError(
            f"cannot convert between layouts of {a.in_shape} and {b.in_shape} data"
        )
    shifts = set()
    for index in itertools.product(*(range(s) for s in a.in_shape)):
        src = source.map.eval(index)[-1]
        dst = target.map.eval(index)[-1]
        if src != dst:
            shifts.add((dst - src) % slots)
    return shifts


def slot_permutation(source: Layout, target: Layout, slots: int) -> list[int]:
    """Full slot-to-slot permutation turning `source` packing into `target`.

    Slots are grouped by the data element they carry and paired off in
    sorted order; this requires both layouts to replicate every element the
    same number of times (and to pad the same number of slots).
    """
    a, b = source.alignment, target.alignment
    if a.in_shape != b.in_shape:
        raise IrError(
            f"cannot convert between layouts of {a.in_shape} and {b.in_shape} data"
        )
    if source.num_ciphertext_dims or target.num_ciphertext_dims:
        raise IrError("slot permutations are defined for single-ciphertext layouts")

    def slot_groups(lay: Layout) -> dict[object, list[int]]:
        groups: dict[object, list[int]] = {}
        seen = [False] * slots
        for aligned in itertools.product(*(range(s) for s in lay.alignment.out_shape)):
            slot = lay.map.eval(aligned)[-1]
            if not 0 <= slot < slots:
                raise IrError(f"layout maps {aligned} outside [0, {slots})")
            if seen[slot]:
                continue
            seen[slot] = True
            groups.setdefault(lay.alignment.resolve(aligned), []).append(slot)
        for s in range(slots):
            if not seen[s]:
                groups.setdefault(None, []).append(s)
        return {k: sorted(v) for k, v in groups.items()}

    src_groups = slot_groups(source)
    dst_groups = slot_groups(target)
    perm = [-1] * slots
    for key, src_slots in src_groups.items():
        dst_slots = dst_groups.get(key)
        if dst_slots is None or len(dst_slots) != len(src_slots):
            raise IrError(
                "layout conversion is not a slot permutation: replication "
                "counts differ between source and target"
            )
        for s, d in zip(src_slots, dst_slots):
            perm[s] = d
    return perm


def default_layout(payload: IrType, slots: int) -> Layout:
    if isinstance(payload, TensorType):
        if len(payload.shape) == 1:
            return layouts.row_major_vector(payload.shape[0], slots)
        if len(payload.shape) == 2:
            return layouts.row_major_matrix(payload.shape[0], payload.shape[1], slots)
        raise IrError(f"no default layout for rank-{len(payload.shape)} tensors")
    return layouts.replicated_scalar(slots)


# ---------------------------------------------------------------------------
# layout-propagation
# ---------------------------------------------------------------------------


def value_layouts(fn: Function) -> dict[int, Layout]:
    """Collect the layout of every annotated secret value in `fn`."""
    table: dict[int, Layout] = {}
    for arg, attrs in zip(fn.args, fn.arg_attrs):
        lay = attrs.get("layout")
        if isinstance(lay, Layout):
            table[id(arg)] = lay
    for op in fn.body.ops:
        lay = op.attributes.get("layout")
        if isinstance(lay, Layout) and op.results:
            for r in op.results:
                table[id(r)] = lay
    return table


class _Propagator:
    def __init__(self, fn: Function, slots: int):
        self.fn = fn
        self.slots = slots
        self.layout: dict[int, Layout] = {}
        self.assigned: dict[tuple[int, str], Value] = {}
        self.converted: dict[tuple[int, str], Value] = {}
        self.out_ops: list[Operation] = []

    def fail(self, msg: str):
        raise IrError(f"@{self.fn.name}: {msg}")

    def layout_of(self, value: Value) -> Layout:
        lay = self.layout.get(id(value))
        if lay is None:
            self.fail(f"secret value of type {value.type} has no layout")
        return lay

    def run(self) -> None:
        fn = self.fn
        for arg, attrs in zip(fn.args, fn.arg_attrs):
            if isinstance(arg.type, SecretType):
                lay = attrs.get("layout")
                if not isinstance(lay, Layout):
                    lay = default_layout(strip_secret(arg.type), self.slots)
                    attrs["layout"] = lay
                self.layout[id(arg)] = lay
        for op in list(fn.body.ops):
            if op.name == "secret.generic":
                self.visit_generic(op)
            elif op.name == "secret.conceal":
                lay = default_layout(strip_secret(op.results[0].type), self.slots)
                op.attributes["layout"] = lay
                self.layout[id(op.results[0])] = lay
            elif op.name == "return":
                for i, v in enumerate(op.operands):
                    if id(v) in self.layout:
                        fn.res_attrs[i]["layout"] = self.layout[id(v)]
            self.out_ops.append(op)
        fn.body.ops = self.out_ops

    # -- helpers -----------------------------------------------------------

    def convert(self, value: Value, target: Layout) -> Value:
        """Secret `value` re-laid to `target` via a convert_layout generic."""
        source = self.layout_of(value)
        key = (id(value), target.to_text())
        hit = self.converted.get(key)
        if hit is not None:
            return hit
        payload = strip_secret(value.type)
        barg = Value(payload)
        inner = Operation(
            "tensor_ext.convert_layout",
            operands=[barg],
            results=[Value(payload)],
            attributes={"from": source, "to": target},
        )
        block = Block(
            args=[barg],
            ops=[inner, Operation("secret.yield", operands=[inner.results[0]])],
        )
        generic = Operation(
            "secret.generic",
            operands=[value],
            results=[Value(SecretType(payload))],
            regions=[block],
            attributes={"layout": target},
        )
        self.out_ops.append(generic)
        result = generic.results[0]
        self.layout[id(result)] = target
        self.converted[key] = result
        return result

    def assign(self, value: Value, target: Layout) -> Value:
        """Public `value` annotated with the layout a kernel will pack it in."""
        key = (id(value), target.to_text())
        hit = self.assigned.get(key)
        if hit is not None:
            return hit
        op = Operation(
            "tensor_ext.assign_layout",
            operands=[value],
            results=[Value(value.type)],
            attributes={"layout": target},
        )
        self.out_ops.append(op)
        self.assigned[key] = op.results[0]
        return op.results[0]

    # -- per-op rules --------------------------------------------------------

    def visit_generic(self, generic: Operation) -> None:
        region = generic.regions[0]
        inner = region.ops[:-1]
        if len(inner) != 1:
            self.fail(
                "layout-propagation expects one op per generic; "
                "run distribute-generic first"
            )
        op = inner[0]
        to_outer = {id(b): o for b, o in zip(region.args, generic.operands)}

        def retarget(inner_value: Value, target: Layout) -> None:
            """Ensure the outer value behind `inner_value` has layout `target`."""
            outer = to_outer[id(inner_value)]
            if self.layout_of(outer) == target:
                return
            converted = self.convert(outer, target)
            slot = generic.operands.index(outer)
            generic.operands[slot] = converted
            to_outer[id(inner_value)] = converted

        name = op.name
        if name in POINTWISE:
            target = None
            for v in op.operands:
                if id(v) in to_outer:
                    target = self.layout_of(to_outer[id(v)])
                    break
            if target is None:
                self.fail(f"'{name}' inside a generic has no secret operand")
            for i, v in enumerate(op.operands):
                if id(v) in to_outer:
                    retarget(v, target)
                else:
                    op.operands[i] = self.assign(v, target)
        elif name == "linalg.matvec":
            matrix, vector = op.operands
            shape = matrix.type.shape
            if shape[0] != shape[1]:
                self.fail(
                    f"matvec lowering needs a square matrix, got "
                    f"{shape[0]}x{shape[1]}; rectangular matrices are not "
                    "supported — pad to square first"
                )
            n = shape[0]
            if n & (n - 1) or self.slots % n:
                self.fail(
                    f"matvec size {n} must be a power of two dividing the "
                    f"slot count {self.slots}"
                )
            if id(matrix) in to_outer:
                self.fail(
                    "secret matrices are not supported by the diagonal "
                    "matvec kernel; only the vector may be secret"
                )
            target = layouts.row_major_vector(n, self.slots)
            if id(vector) not in to_outer:
                self.fail("matvec with a public vector belongs outside the generic")
            retarget(vector, target)
            op.operands[0] = self.assign(matrix, layouts.squat_diagonal(n, self.slots))
        elif name == "tensor_ext.reduce":
            self.layout_of(to_outer[id(op.operands[0])])
            target = layouts.replicated_scalar(self.slots)
        elif name == "tensor.extract":
            src, index = op.operands
            lay = self.layout_of(to_outer[id(src)])
            if op.attributes.get("replicated"):
                target = layouts.replicated_scalar(self.slots)
            else:
                const = self.constant_value(index)
                if const is None:
                    self.fail("extracting from a packed tensor needs a constant index")
                if lay.num_ciphertext_dims:
                    self.fail("extract from a multi-ciphertext layout is unsupported")
                target = layouts.scalar_at_slot(lay.map.eval((const,))[-1])
        elif name == "tensor_ext.rotate":
            target = self.layout_of(to_outer[id(op.operands[0])])
        elif name == "tensor_ext.convert_layout":
            target = op.attributes.get("to")
            if not isinstance(target, Layout):
                self.fail("convert_layout needs a 'to' layout attribute")
            op.attributes["from"] = self.layout_of(to_outer[id(op.operands[0])])
        elif name.startswith("mgmt.") or name == "tensor_ext.retype":
            target = self.layout_of(to_outer[id(op.operands[0])])
        else:
            self.fail(f"no layout rule for '{name}'")

        generic.attributes["layout"] = target
        for r in generic.results:
            self.layout[id(r)] = target

    def constant_value(self, value: Value):
        for op in self.fn.body.ops:
            if op.name == "arith.constant" and op.results and op.results[0] is value:
                return op.attributes.get("value")
        return None


def layout_propagation(module: IrModule, slots: int = 1024) -> None:
    if slots <= 0 or slots & (slots - 1):
        raise IrError(f"slot count must be a power of two, got {slots}")
    for fn in module.functions:
        if any(isinstance(a.type, SecretType) for a in fn.args) or any(
            op.name in ("secret.generic", "secret.conceal") for op in fn.body.ops
        ):
            _Propagator(fn, slots).run()
            fn.attributes["slots"] = slots


# ---------------------------------------------------------------------------
# layout-optimizer
# ---------------------------------------------------------------------------


def _conversion_parts(op: Operation):
    """(outer operand, inner op) if `op` is a single-conversion generic."""
    if op.name != "secret.generic" or len(op.regions) != 1 or len(op.operands) != 1:
        return None
    ops = op.regions[0].ops
    if len(ops) != 2 or ops[0].name != "tensor_ext.convert_layout":
        return None
    return op.operands[0], ops[0]


def _count_uses(fn: Function, value: Value) -> int:
    return sum(sum(1 for v in op.operands if v is value) for op in fn.walk())


def total_cost(module: IrModule, cost: CostModel) -> float:
    """Modeled cost of every generic-wrapped op plus its layout conversions."""
    out = 0.0
    for fn in module.functions:
        slots = fn.attributes.get("slots", 1024)
        for op in fn.body.ops:
            if op.name != "secret.generic" or not op.regions:
                continue
            for inner in op.regions[0].ops[:-1]:
                if inner.name == "tensor_ext.convert_layout":
                    src = inner.attributes.get("from")
                    dst = inner.attributes.get("to")
                    if isinstance(src, Layout) and isinstance(dst, Layout):
                        out += cost.conversion_cost(src, dst, slots)
                    continue
                out += cost.op_cost(inner.name, len(op.operands))
    return out


class _Optimizer:
    def __init__(self, fn: Function, cost: CostModel, slots: int):
        self.fn = fn
        self.cost = cost
        self.slots = slots

    def run(self) -> bool:
        changed = False
        producers = {}
        for op in self.fn.body.ops:
            for r in op.results:
                producers[id(r)] = op
        for op in reversed(list(self.fn.body.ops)):
            parts = _conversion_parts(op)
            if parts is None:
                continue
            if self.try_hoist(op, *parts, producers):
                changed = True
                producers = {}
                for o in self.fn.body.ops:
                    for r in o.results:
                        producers[id(r)] = o
        return changed

    def existing_conversion(
        self, value: Value, target: Layout, before: int
    ) -> Value | None:
        for op in self.fn.body.ops[:before]:
            parts = _conversion_parts(op)
            if parts is None:
                continue
            operand, inner = parts
            if operand is value and inner.attributes.get("to") == target:
                return op.results[0]
        return None

    def try_hoist(
        self,
        conv_generic: Operation,
        source_value: Value,
        conv_op: Operation,
        producers: dict[int, Operation],
    ) -> bool:
        producer = producers.get(id(source_value))
        if producer is None or producer.name != "secret.generic":
            return False
        inner_ops = producer.regions[0].ops[:-1]
        if len(inner_ops) != 1 or inner_ops[0].name not in POINTWISE:
            return False
        inner = inner_ops[0]
        target = conv_op.attributes.get("to")
        source = conv_op.attributes.get("from")
        if not isinstance(target, Layout) or not isinstance(source, Layout):
            return False

        conv_cost = self.cost.conversion_cost(source, target, self.slots)
        conv_index = self.fn.body.ops.index(conv_generic)
        new_conversions = 0
        for operand in producer.operands:
            if self.existing_conversion(operand, target, conv_index) is None:
                new_conversions += 1
        net = (new_conversions - 1) * conv_cost
        if _count_uses(self.fn, source_value) > 1:
            # the original op must stay for its other consumers
            net += self.cost.op_cost(inner.name, len(producer.operands))
        if net >= 0:
            return False

        # build the hoisted form: convert each secret operand, re-run the op
        to_inner = {
            id(o): b for b, o in zip(producer.regions[0].args, producer.operands)
        }
        position = self.fn.body.ops.index(conv_generic)
        new_outer: list[Value] = []
        new_args: list[Value] = []
        inner_map: dict[int, Value] = {}
        for operand in producer.operands:
            converted = self.existing_conversion(operand, target, position)
            if converted is None:
                converted = self.build_conversion(operand, source, target, position)
                position += 1
            barg = Value(strip_secret(converted.type))
            new_outer.append(converted)
            new_args.append(barg)
            inner_map[id(to_inner[id(operand)])] = barg

        new_operands = []
        for v in inner.operands:
            if id(v) in inner_map:
                new_operands.append(inner_map[id(v)])
            elif self.is_assign_with(v, source):
                new_operands.append(self.reassign(v, target, position))
            else:
                new_operands.append(v)
        new_inner = Operation(
            inner.name,
            operands=new_operands,
            results=[Value(r.type) for r in inner.results],
            attributes=dict(inner.attributes),
        )
        block = Block(
            args=new_args,
            ops=[new_inner, Operation("secret.yield", operands=list(new_inner.results))],
        )
        hoisted = Operation(
            "secret.generic",
            operands=new_outer,
            results=[Value(r.type) for r in conv_generic.results],
            regions=[block],
            attributes={"layout": target},
        )
        self.fn.body.ops.insert(self.fn.body.ops.index(conv_generic), hoisted)
        for old, new in zip(conv_generic.results, hoisted.results):
            replace_uses(self.fn, old, new)
        self.fn.body.ops.remove(conv_generic)
        return True

    def build_conversion(
        self, value: Value, source: Layout, target: Layout, position: int
    ) -> Value:
        payload = strip_secret(value.type)
        barg = Value(payload)
        inner = Operation(
            "tensor_ext.convert_layout",
            operands=[barg],
            results=[Value(payload)],
            attributes={"from": source, "to": target},
        )
        block = Block(
            args=[barg],
            ops=[inner, Operation("secret.yield", operands=[inner.results[0]])],
        )
        generic = Operation(
            "secret.generic",
            operands=[value],
            results=[Value(SecretType(payload))],
            regions=[block],
            attributes={"layout": target},
        )
        self.fn.body.ops.insert(position, generic)
        return generic.results[0]

    def is_assign_with(self, value: Value, layout: Layout) -> bool:
        for op in self.fn.body.ops:
            if (
                op.name == "tensor_ext.assign_layout"
                and op.results[0] is value
                and op.attributes.get("layout") == layout
            ):
                return True
        return False

    def reassign(self, value: Value, target: Layout, position: int) -> Value:
        source_op = next(
            op
            for op in self.fn.body.ops
            if op.name == "tensor_ext.assign_layout" and op.results[0] is value
        )
        op = Operation(
            "tensor_ext.assign_layout",
            operands=[source_op.operands[0]],
            results=[Value(source_op.operands[0].type)],
            attributes={"layout": target},
        )
        self.fn.body.ops.insert(position, op)
        return op.results[0]


def layout_optimizer(module: IrModule, cost: CostModel | None = None) -> None:
    cost = cost or CostModel()
    before = total_cost(module, cost)
    for fn in module.functions:
        slots = fn.attributes.get("slots", 1024)
        optimizer = _Optimizer(fn, cost, slots)
        for _ in range(100):  # each hoist strictly lowers modeled cost
            if not optimizer.run():
                break
    after = total_cost(module, cost)
    if after > before + 1e-9:
        raise IrError(
            f"layout-optimizer increased modeled cost ({before} -> {after})"
        )


@register_pass("layout-propagation")
def _layout_propagation_pass(module: IrModule, slots: int = 1024) -> None:
    layout_propagation(module, slots=int(slots))


@register_pass("layout-optimizer")
def _layout_optimizer_pass(module: IrModule, rotation_cost: float = 1.0) -> None:
    layout_optimizer(module, CostModel(rotation=float(rotation_cost)))
