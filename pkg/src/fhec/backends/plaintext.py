"""Reference interpreter: exact integer/float evaluation of any module.

Every compilation stage must preserve plaintext semantics, so this
interpreter doubles as the oracle for pass-equivalence tests. Scheme and
management ops evaluate as the arithmetic they implement (relinearize,
mod-reduce, and scale bookkeeping are identities on exact values). Tensors
are flat row-major lists; shapes live in the types.
"""
from __future__ import annotations

import math
from typing import Any, Callable

from ..ir.types import (
    Block,
    CiphertextType,
    Function,
    IrError,
    IrModule,
    Operation,
    PlaintextType,
    SecretType,
    TensorType,
)
from ..layout import core as layout_core

DebugCallback = Callable[[dict, Any], None]


def _payload_type(t):
    while isinstance(t, (SecretType, CiphertextType, PlaintextType)):
        t = t.inner
    return t


def _shape_of(t) -> tuple[int, ...]:
    t = _payload_type(t)
    if isinstance(t, TensorType):
        return t.shape
    return ()


def _unary(f, a):
    return [f(x) for x in a] if isinstance(a, list) else f(a)


def _binary(f, a, b):
    a_list, b_list = isinstance(a, list), isinstance(b, list)
    if a_list or b_list:
        if not a_list:
            a = [a] * len(b)
        if not b_list:
            b = [b] * len(a)
        if len(a) != len(b):
            raise IrError(f"elementwise op on lengths {len(a)} and {len(b)}")
        return [f(x, y) for x, y in zip(a, b)]
    return f(a, b)


_CMP = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "slt": lambda a, b: a < b,
    "sle": lambda a, b: a <= b,
    "sgt": lambda a, b: a > b,
    "sge": lambda a, b: a >= b,
}

_ADD = lambda a, b: a + b  # noqa: E731
_SUB = lambda a, b: a - b  # noqa: E731
_MUL = lambda a, b: a * b  # noqa: E731


class Interpreter:
    def __init__(self, module: IrModule, debug_callback: DebugCallback | None = None):
        self.module = module
        self.debug_callback = debug_callback
        self.max_abs = 0  # largest |integer| produced anywhere

    # -- entry points --------------------------------------------------------
    def run_function(self, fn: Function, inputs: list) -> list:
        if len(inputs) != len(fn.args):
            raise IrError(
                f"@{fn.name} takes {len(fn.args)} inputs, got {len(inputs)}"
            )
        env: dict[int, Any] = {}
        for arg, value in zip(fn.args, inputs):
            env[id(arg)] = self._note(value)
        results = self._run_block(fn.body, env)
        if results is None:
            raise IrError(f"@{fn.name} did not return")
        return results

    def call(self, name: str, inputs: list) -> list:
        return self.run_function(self.module.get_function(name), inputs)

    # -- execution -----------------------------------------------------------
    def _run_block(self, block: Block, env: dict[int, Any]) -> list | None:
        """Run ops in order; returns terminator operand values, else None."""
        for op in block.ops:
            if op.name in ("return", "secret.yield", "affine.yield", "scf.yield"):
                return [env[id(v)] for v in op.operands]
            self._step(op, env)
        return None

    def _step(self, op: Operation, env: dict[int, Any]) -> None:
        args = [env[id(v)] for v in op.operands]
        if op.regions:
            outs = self._eval_region_op(op, args, env)
        else:
            outs = self._eval(op, op.attributes, args)
        if len(outs) != len(op.results):
            raise IrError(f"{op.name}: produced {len(outs)} values, expected {len(op.results)}")
        for r, v in zip(op.results, outs):
            env[id(r)] = self._note(v)

    def _note(self, value):
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int):
            self.max_abs = max(self.max_abs, abs(value))
        elif isinstance(value, list) and value and isinstance(value[0], int):
            self.max_abs = max(self.max_abs, max(abs(x) for x in value))
        return value

    def _eval_region_op(self, op: Operation, args: list, env: dict[int, Any]) -> list:
        if op.name == "secret.generic":
            block = op.regions[0]
            for barg, value in zip(block.args, args):
                env[id(barg)] = value
            return self._run_block(block, env) or []
        if op.name == "affine.for":
            lower = op.attributes["lower"]
            upper = op.attributes["upper"]
            step = op.attributes.get("step", 1)
            return self._run_loop(op, range(lower, upper, step), args, env)
        if op.name == "scf.for":
            return self._run_loop(op, range(args[0]), args[1:], env)
        if op.name == "scf.if":
            block = op.regions[0] if args[0] else op.regions[1]
            return self._run_block(block, env) or []
        raise IrError(f"cannot interpret region op {op.name}")

    def _run_loop(self, op: Operation, space, inits: list, env: dict[int, Any]) -> list:
        block = op.regions[0]
        carried = list(inits)
        for i in space:
            env[id(block.args[0])] = i
            for barg, value in zip(block.args[1:], carried):
                env[id(barg)] = value
            carried = self._run_block(block, env) or []
        return carried

    # -- regionless ops --------------------------------------------------------
    def _eval(self, op: Operation, attrs: dict, args: list) -> list:
        name = op.name
        if name == "arith.constant":
            value = attrs["value"]
            return [list(value) if isinstance(value, list) else value]
        if name in ("arith.add", "arith.addf"):
            return [_binary(_ADD, args[0], args[1])]
        if name in ("arith.sub", "arith.subf"):
            return [_binary(_SUB, args[0], args[1])]
        if name in ("arith.mul", "arith.mulf"):
            return [_binary(_MUL, args[0], args[1])]
        if name == "arith.maximumf":
            return [_binary(max, args[0], args[1])]
        if name == "math.tanh":
            return [_unary(math.tanh, args[0])]
        if name == "math.exp":
            return [_unary(math.exp, args[0])]
        if name == "arith.cmpi":
            return [int(_CMP[attrs["pred"]](args[0], args[1]))]
        if name == "arith.select":
            return [args[1] if args[0] else args[2]]
        if name == "arith.index_cast":
            return [args[0]]
        if name == "tensor.extract":
            return [args[0][args[1]]]
        if name == "tensor.insert":
            out = list(args[1])
            out[args[2]] = args[0]
            return [out]
        if name == "linalg.matvec":
            rows, cols = op.operands[0].type.shape
            mat, vec = args
            return [
                [sum(mat[r * cols + c] * vec[c] for c in range(cols)) for r in range(rows)]
            ]
        if name == "tensor_ext.rotate":
            return [self._rotate(args[0], attrs["amount"])]
        if name == "tensor_ext.reduce":
            if attrs["kind"] == "add":
                return [sum(args[0])]
            return [math.prod(args[0])]
        if name == "tensor_ext.slice":
            rows, cols = op.operands[0].type.shape
            i = attrs["index"]
            return [args[0][i * cols : (i + 1) * cols]]
        if name in ("tensor_ext.convert_layout", "tensor_ext.retype"):
            return [args[0]]
        if name == "tensor_ext.assign_layout":
            if op.results[0].type == op.operands[0].type:
                return [args[0]]  # annotation form: no repacking yet
            shape = _shape_of(op.results[0].type)
            data = args[0] if isinstance(args[0], list) else [args[0]]
            return [layout_core.pack(attrs["layout"], data, shape)]
        if name == "secret.conceal":
            return [args[0]]
        if name.startswith("mgmt."):
            return [args[0]]
        if name == "polynomial.eval":
            poly = attrs["poly"]
            x = args[0]
            return [[poly(v) for v in x] if isinstance(x, list) else poly(x)]
        if name == "parallel.batch":
            return self._eval_batch(op, attrs, args)
        if name == "debug.handler":
            if self.debug_callback is not None:
                self.debug_callback(dict(attrs), args[0])
            return []
        scheme = name.split(".", 1)
        if scheme[0] in ("bgv", "ckks_sim"):
            return self._eval_scheme(scheme[1], attrs, args)
        if name == "client.encode":
            shape = _shape_of(op.results[0].type)
            data = args[0] if isinstance(args[0], list) else [args[0]]
            return [layout_core.pack(attrs["layout"], data, shape)]
        if name == "client.decode":
            out_type = _payload_type(op.results[0].type)
            values = layout_core.unpack(
                attrs["layout"], args[0], _shape_of(op.operands[0].type)
            )
            if isinstance(out_type, TensorType):
                return [values]
            return [values[0]]
        if name in ("client.encrypt", "client.decrypt"):
            return [args[0]]
        raise IrError(f"cannot interpret op {name}")

    def _rotate(self, vec: list, amount: int) -> list:
        n = len(vec)
        amount %= n
        return vec[amount:] + vec[:amount]

    def _eval_scheme(self, kind: str, attrs: dict, args: list) -> list:
        if kind == "add":
            return [_binary(_ADD, args[0], args[1])]
        if kind == "sub":
            return [_binary(_SUB, args[0], args[1])]
        if kind == "mul":
            return [_binary(_MUL, args[0], args[1])]
        if kind == "add_plain":
            return [_binary(_ADD, args[0], args[1])]
        if kind == "mul_plain":
            return [_binary(_MUL, args[0], args[1])]
        if kind == "rotate":
            return [self._rotate(args[0], attrs["amount"])]
        if kind in ("relinearize", "mod_reduce", "scale_adjust"):
            return [args[0]]
        raise IrError(f"cannot interpret scheme op {kind}")

    def _eval_batch(self, op: Operation, attrs: dict, args: list) -> list:
        inner = attrs["inner"]
        width = attrs["width"]
        if len(args) % width:
            raise IrError("batch operands not divisible by width")
        per = len(args) // width
        fake = Operation(inner)
        outs: list = []
        for w in range(width):
            outs.extend(self._eval(fake, {}, args[w * per : (w + 1) * per]))
        return outs


# ---------------------------------------------------------------------------
# public entry point with packing-aware adaptation
# ---------------------------------------------------------------------------


def _adapt_input(fn: Function, i: int, value):
    layout = fn.arg_attrs[i].get("layout")
    if layout is None or not fn.attributes.get("ciphertext_semantics"):
        return value
    data = value if isinstance(value, list) else [value]
    return layout_core.pack(layout, data, _shape_of(fn.args[i].type))


def _adapt_output(fn: Function, i: int, value):
    layout = fn.res_attrs[i].get("layout")
    if layout is None or not fn.attributes.get("ciphertext_semantics"):
        return value
    data = layout_core.unpack(layout, value, _shape_of(fn.result_types[i]))
    orig = fn.res_attrs[i].get("orig_type", "")
    if not str(orig).startswith("tensor"):
        return data[0]
    return data


def interpret(
    module: IrModule,
    inputs: list,
    function: str | None = None,
    debug_callback: DebugCallback | None = None,
    stats: dict | None = None,
) -> list:
    """Run a function (default: the module's main) on concrete inputs.

    If the function was converted to ciphertext semantics, logical inputs
    are packed per the recorded argument layouts and results are unpacked,
    so callers always deal in the original program's values.
    """
    interp = Interpreter(module, debug_callback)
    fn = module.get_function(function) if function else module.main
    adapted = [_adapt_input(fn, i, v) for i, v in enumerate(inputs)]
    results = interp.run_function(fn, adapted)
    results = [_adapt_output(fn, i, v) for i, v in enumerate(results)]
    if stats is not None:
        stats["max_abs"] = interp.max_abs
    return results
