"""Textual form of the IR. `print_module` and `parse_module` round-trip."""
from __future__ import annotations

import json

from .affine import AffineMap
from .attributes import ApproxSpec, Layout, StaticPolynomial
from .types import Block, Function, IrModule, IrType, Operation, Value


def format_attr(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(format_attr(v) for v in value) + "]"
    if isinstance(value, AffineMap):
        return str(value)
    if isinstance(value, Layout):
        return value.to_text()
    if isinstance(value, StaticPolynomial):
        return value.to_text()
    if isinstance(value, ApproxSpec):
        return value.to_text()
    if isinstance(value, IrType):
        return str(value)
    raise TypeError(f"cannot print attribute {value!r}")


def format_attr_dict(attrs: dict) -> str:
    if not attrs:
        return ""
    parts = []
    for k in sorted(attrs):
        v = attrs[k]
        if v is True:  # unit attribute, printed bare
            parts.append(k)
        else:
            parts.append(f"{k} = {format_attr(v)}")
    return "{" + ", ".join(parts) + "}"


class _Printer:
    def __init__(self):
        self.names: dict[int, str] = {}
        self.next_id = 0
        self.lines: list[str] = []

    def name(self, v: Value) -> str:
        got = self.names.get(v.uid)
        if got is None:
            got = f"%{self.next_id}"
            self.next_id += 1
            self.names[v.uid] = got
        return got

    def emit(self, indent: int, text: str) -> None:
        self.lines.append("  " * indent + text)

    def type_sig(self, operands: list[Value], results: list[Value]) -> str:
        ins = ", ".join(str(v.type) for v in operands)
        if len(results) == 0:
            outs = "()"
        elif len(results) == 1:
            outs = str(results[0].type)
        else:
            outs = "(" + ", ".join(str(v.type) for v in results) + ")"
        return f"({ins}) -> {outs}"

    def op(self, o: Operation, indent: int) -> None:
        parts = []
        if o.results:
            parts.append(", ".join(self.name(r) for r in o.results) + " =")
        parts.append(o.name)
        if o.operands:
            parts.append(", ".join(self.name(v) for v in o.operands))
        attr_text = format_attr_dict(o.attributes)
        if attr_text:
            parts.append(attr_text)
        head = " ".join(parts)
        if o.regions:
            for block in o.regions:
                args = ", ".join(
                    f"{self.name(a)}: {a.type}" for a in block.args
                )
                head += f" ({args}) {{"
                self.emit(indent, head)
                for inner in block.ops:
                    self.op(inner, indent + 1)
                head = "}"
            head += f" : {self.type_sig(o.operands, o.results)}"
            self.emit(indent, head)
        else:
            self.emit(indent, f"{head} : {self.type_sig(o.operands, o.results)}")

    def function(self, fn: Function) -> None:
        args = []
        for a, attrs in zip(fn.args, fn.arg_attrs):
            text = f"{self.name(a)}: {a.type}"
            at = format_attr_dict(attrs)
            if at:
                text += f" {at}"
            args.append(text)
        if any(fn.res_attrs) or len(fn.result_types) != 1:
            outs = []
            for t, attrs in zip(fn.result_types, fn.res_attrs):
                text = str(t)
                at = format_attr_dict(attrs)
                if at:
                    text += f" {at}"
                outs.append(text)
            res = "(" + ", ".join(outs) + ")"
        else:
            res = str(fn.result_types[0])
        head = f"func @{fn.name}({', '.join(args)}) -> {res}"
        fn_attrs = format_attr_dict(fn.attributes)
        if fn_attrs:
            head += f" {fn_attrs}"
        self.emit(0, head + " {")
        for o in fn.body.ops:
            self.op(o, 1)
        self.emit(0, "}")


def print_module(m: IrModule) -> str:
    p = _Printer()
    for i, fn in enumerate(m.functions):
        # fresh numbering per function; argument names use %argN style
        p.names = {}
        p.next_id = 0
        for j, a in enumerate(fn.args):
            p.names[a.uid] = f"%arg{j}"
        if i:
            p.lines.append("")
        p.function(fn)
    return "\n".join(p.lines) + "\n"


def print_op(o: Operation) -> str:
    p = _Printer()
    p.op(o, 0)
    return "\n".join(p.lines)
