"""Switch a laid-out module from logical tensors to ciphertext slot tensors.

After this pass every secret value has payload ``tensor<slots x elt>`` — the
shape the scheme actually computes on — and ops are rewritten to match:

* pointwise arithmetic stays pointwise (now over full slot vectors);
* `tensor_ext.assign_layout` gets its packed result type, so backends pack
  (or encode) the plaintext data;
* `linalg.matvec` becomes the Halevi-Shoup kernel
  ``sum_k rotate(v, k) * diag_k(M)`` over the diagonal-packed matrix;
* `tensor_ext.convert_layout` becomes a shift network (identity conversions
  are erased);
* extracts marked `replicated` disappear (the scalar already fills every
  slot); other constant-index extracts become one-hot masks.

The original argument/result payload types are kept in `orig_type` attrs so
clients (and the reference backend) can keep presenting logical values.
"""
from __future__ import annotations

from ..ir.attributes import Layout
from ..ir.passes import register_pass
from ..ir.types import (
    Block,
    Function,
    IrError,
    IrModule,
    Operation,
    SecretType,
    TensorType,
    Value,
    element_type,
    replace_uses,
    strip_secret,
)
from . import core as layouts
from .propagate import POINTWISE, slot_permutation, value_layouts
from .shift_network import ShiftNetworkProgram, implement_shift_network


def packed_shape(layout: Layout, slots: int) -> tuple[int, ...]:
    """(ciphertext dims..., slots) for data laid out by `layout`."""
    ct_dims = len(layout.map.exprs) - 1
    return tuple(layout.alignment.out_shape[:ct_dims]) + (slots,)


def _slot_tensor(value: Value, slots: int) -> TensorType:
    return TensorType((slots,), element_type(strip_secret(value.type)))


def _is_periodic(layout: Layout, slots: int) -> bool:
    """True when whole-vector slot rotation matches logical rotation."""
    a = layout.alignment
    return (
        len(a.in_shape) == 1
        and a.padding == (0,)
        and a.out_shape == (slots,)
    )


class _Converter:
    def __init__(self, fn: Function, slots: int):
        self.fn = fn
        self.slots = slots
        self.layout = value_layouts(fn)
        self.hoisted: list[Operation] = []  # public ops to place before the generic

    def fail(self, msg: str) -> None:
        raise IrError(f"@{self.fn.name}: {msg}")

    def run(self) -> None:
        fn = self.fn
        for i, arg in enumerate(fn.args):
            if isinstance(arg.type, SecretType):
                payload = strip_secret(arg.type)
                lay = fn.arg_attrs[i].get("layout")
                if not isinstance(lay, Layout):
                    self.fail(f"argument {i} has no layout; run layout-propagation")
                self.check_capacity(lay)
                fn.arg_attrs[i]["orig_type"] = payload
                arg.type = SecretType(TensorType((self.slots,), element_type(payload)))
        for i, t in enumerate(fn.result_types):
            if isinstance(t, SecretType):
                payload = strip_secret(t)
                fn.res_attrs[i]["orig_type"] = payload
                fn.result_types[i] = SecretType(
                    TensorType((self.slots,), element_type(payload))
                )

        new_ops: list[Operation] = []
        for op in fn.body.ops:
            self.hoisted = []
            if op.name == "tensor_ext.assign_layout":
                self.convert_assign(op)
            elif op.name == "secret.generic":
                self.convert_generic(op)
            elif op.name == "secret.conceal":
                self.convert_conceal(op, new_ops)
            new_ops.extend(self.hoisted)
            new_ops.append(op)
        fn.body.ops = new_ops
        fn.attributes["ciphertext_semantics"] = True

    def check_capacity(self, layout: Layout) -> None:
        if layout.alignment.out_shape[-1] > self.slots:
            self.fail(
                f"layout needs {layout.alignment.out_shape[-1]} slots, "
                f"only {self.slots} available"
            )

    def convert_assign(self, op: Operation) -> None:
        lay = op.attributes["layout"]
        self.check_capacity(lay)
        element = element_type(op.operands[0].type)
        op.results[0].type = TensorType(packed_shape(lay, self.slots), element)

    def convert_conceal(self, op: Operation, new_ops: list[Operation]) -> None:
        lay = op.attributes.get("layout")
        if not isinstance(lay, Layout):
            self.fail("conceal without a layout; run layout-propagation")
        packed = Operation(
            "tensor_ext.assign_layout",
            operands=[op.operands[0]],
            results=[Value(TensorType(packed_shape(lay, self.slots),
                                      element_type(op.operands[0].type)))],
            attributes={"layout": lay},
        )
        new_ops.append(packed)
        op.operands[0] = packed.results[0]
        op.results[0].type = SecretType(packed.results[0].type)

    # -- generic bodies ------------------------------------------------------

    def convert_generic(self, generic: Operation) -> None:
        region = generic.regions[0]
        inner_layout: dict[int, Layout] = {}
        for barg, outer in zip(region.args, generic.operands):
            lay = self.layout.get(id(outer))
            if lay is None:
                self.fail(f"generic operand of type {outer.type} has no layout")
            inner_layout[id(barg)] = lay
            barg.type = _slot_tensor(outer, self.slots)

        new_inner: list[Operation] = []
        for op in region.ops:
            replacement = self.convert_inner(generic, op, inner_layout, new_inner)
            if replacement is not None:
                new_inner.append(op)
        region.ops = new_inner

        for r in generic.results:
            r.type = SecretType(_slot_tensor(r, self.slots))

    def convert_inner(
        self,
        generic: Operation,
        op: Operation,
        inner_layout: dict[int, Layout],
        new_inner: list[Operation],
    ):
        """Rewrite one region op; return `op` to keep it, None if replaced."""
        name = op.name

        def layout_of(value: Value) -> Layout | None:
            return inner_layout.get(id(value))

        def inherit(result_index: int = 0) -> None:
            lay = layout_of(op.operands[0])
            if lay is not None:
                inner_layout[id(op.results[result_index])] = lay

        if name in ("secret.yield", "arith.constant"):
            return op
        if name in POINTWISE:
            inherit()
            for r in op.results:
                r.type = _slot_tensor(r, self.slots)
            return op
        if name.startswith("mgmt.") or name == "tensor_ext.retype":
            inherit()
            op.results[0].type = op.operands[0].type
            return op
        if name == "tensor_ext.rotate":
            lay = layout_of(op.operands[0])
            if lay is not None and not _is_periodic(lay, self.slots):
                self.fail(
                    "rotate needs a pad-free layout replicated across all "
                    f"slots, got {lay.to_text()}"
                )
            inherit()
            op.results[0].type = op.operands[0].type
            return op
        if name == "tensor.extract":
            if op.attributes.get("replicated"):
                replace_uses(self.fn, op.results[0], op.operands[0])
                return None
            lay = generic.attributes.get("layout")
            if not isinstance(lay, Layout):
                self.fail("extract without a scalar layout; run layout-propagation")
            slot = lay.map.eval((0,))[-1]
            mask = [0] * self.slots
            mask[slot] = 1
            element = element_type(op.operands[0].type)
            const = Operation(
                "arith.constant",
                results=[Value(TensorType((self.slots,), element))],
                attributes={"value": mask},
            )
            masked = Operation(
                "arith.mul",
                operands=[op.operands[0], const.results[0]],
                results=[Value(TensorType((self.slots,), element))],
            )
            new_inner += [const, masked]
            replace_uses(self.fn, op.results[0], masked.results[0])
            return None
        if name == "linalg.matvec":
            self.lower_matvec(generic, op, inner_layout, new_inner)
            return None
        if name == "tensor_ext.convert_layout":
            self.lower_convert(op, new_inner)
            return None
        if name == "tensor_ext.reduce":
            self.fail("reduce is still present; run rotate-and-reduce first")
        self.fail(f"no ciphertext-semantics rule for '{name}'")

    # -- kernels ---------------------------------------------------------------

    def lower_matvec(
        self,
        generic: Operation,
        op: Operation,
        inner_layout: dict[int, Layout],
        new_inner: list[Operation],
    ) -> None:
        diag, vector = op.operands
        if not isinstance(diag.type, TensorType) or len(diag.type.shape) != 2:
            self.fail("matvec matrix must be diagonal-packed; run layout-propagation")
        n = diag.type.shape[0]
        element = diag.type.element
        acc: Value | None = None
        for k in range(n):
            piece = Operation(
                "tensor_ext.slice",
                operands=[diag],
                results=[Value(TensorType((self.slots,), element))],
                attributes={"index": k},
            )
            self.hoisted.append(piece)  # public: lives outside the generic
            if k == 0:
                rotated = vector
            else:
                rot = Operation(
                    "tensor_ext.rotate",
                    operands=[vector],
                    results=[Value(TensorType((self.slots,), element))],
                    attributes={"amount": k},
                )
                new_inner.append(rot)
                rotated = rot.results[0]
            term = Operation(
                "arith.mul",
                operands=[rotated, piece.results[0]],
                results=[Value(TensorType((self.slots,), element))],
            )
            new_inner.append(term)
            if acc is None:
                acc = term.results[0]
            else:
                add = Operation(
                    "arith.add",
                    operands=[acc, term.results[0]],
                    results=[Value(TensorType((self.slots,), element))],
                )
                new_inner.append(add)
                acc = add.results[0]
        lay = layouts.row_major_vector(n, self.slots)
        inner_layout[id(acc)] = lay
        replace_uses(self.fn, op.results[0], acc)

    def lower_convert(self, op: Operation, new_inner: list[Operation]) -> None:
        source = op.attributes.get("from")
        target = op.attributes.get("to")
        if not isinstance(source, Layout) or not isinstance(target, Layout):
            self.fail("convert_layout needs 'from' and 'to' layout attributes")
        perm = slot_permutation(source, target, self.slots)
        if perm == list(range(self.slots)):
            replace_uses(self.fn, op.results[0], op.operands[0])
            return
        program = implement_shift_network(perm, self.slots)
        result = materialize_shift_network(
            program, op.operands[0], new_inner, self.slots
        )
        replace_uses(self.fn, op.results[0], result)


def materialize_shift_network(
    program: ShiftNetworkProgram,
    value: Value,
    ops: list[Operation],
    slots: int,
) -> Value:
    """Emit rotate/mask/add ops applying `program` to `value`."""
    element = element_type(strip_secret(value.type))
    slot_type = TensorType((slots,), element)

    def mask_times(x: Value, mask: list[int]) -> Value:
        if all(mask):
            return x
        const = Operation(
            "arith.constant", results=[Value(slot_type)], attributes={"value": list(mask)}
        )
        mul = Operation("arith.mul", operands=[x, const.results[0]], results=[Value(slot_type)])
        ops.extend([const, mul])
        return mul.results[0]

    def add(a: Value, b: Value) -> Value:
        op = Operation("arith.add", operands=[a, b], results=[Value(slot_type)])
        ops.append(op)
        return op.results[0]

    accumulated: Value | None = None
    for cls in program.classes:
        x = mask_times(value, cls.source_mask(slots))
        for stage in cls.stages:
            moved = mask_times(x, stage.move_mask)
            rot = Operation(
                "tensor_ext.rotate",
                operands=[moved],
                results=[Value(slot_type)],
                attributes={"amount": (slots - stage.shift) % slots},
            )
            ops.append(rot)
            if any(stage.keep_mask):
                x = add(rot.results[0], mask_times(x, stage.keep_mask))
            else:
                x = rot.results[0]
        accumulated = x if accumulated is None else add(accumulated, x)
    return accumulated


def convert_to_ciphertext_semantics(module: IrModule, slots: int | None = None) -> None:
    for fn in module.functions:
        if not any(isinstance(a.type, SecretType) for a in fn.args) and not any(
            isinstance(t, SecretType) for t in fn.result_types
        ):
            continue
        fn_slots = slots or fn.attributes.get("slots")
        if not isinstance(fn_slots, int):
            raise IrError(
                f"@{fn.name}: no slot count; run layout-propagation or pass slots"
            )
        _Converter(fn, fn_slots).run()


def implement_shift_networks(module: IrModule) -> None:
    """Lower slot-space convert_layout ops that remain after conversion."""
    for fn in module.functions:
        slots = fn.attributes.get("slots")
        if not fn.attributes.get("ciphertext_semantics") or not isinstance(slots, int):
            continue
        for op in fn.body.ops:
            if op.name != "secret.generic" or not op.regions:
                continue
            region = op.regions[0]
            new_inner: list[Operation] = []
            changed = False
            for inner in region.ops:
                if inner.name == "tensor_ext.convert_layout":
                    source = inner.attributes.get("from")
                    target = inner.attributes.get("to")
                    if isinstance(source, Layout) and isinstance(target, Layout):
                        perm = slot_permutation(source, target, slots)
                        if perm == list(range(slots)):
                            replace_uses(fn, inner.results[0], inner.operands[0])
                        else:
                            program = implement_shift_network(perm, slots)
                            result = materialize_shift_network(
                                program, inner.operands[0], new_inner, slots
                            )
                            replace_uses(fn, inner.results[0], result)
                        changed = True
                        continue
                new_inner.append(inner)
            if changed:
                region.ops = new_inner


@register_pass("convert-to-ciphertext-semantics")
def _ciphertext_semantics_pass(module: IrModule, slots: int | None = None) -> None:
    convert_to_ciphertext_semantics(module, int(slots) if slots else None)


@register_pass("implement-shift-network")
def _shift_network_pass(module: IrModule) -> None:
    implement_shift_networks(module)
