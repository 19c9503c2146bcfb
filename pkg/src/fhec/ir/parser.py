"""Parser for the textual IR format (see printer.py for the grammar)."""
from __future__ import annotations

import json
import re

from .affine import parse_affine_map
from .attributes import parse_approx, parse_layout, parse_polynomial
from .types import (
    Block,
    CiphertextType,
    FloatType,
    Function,
    IndexType,
    IntType,
    IrError,
    IrModule,
    IrType,
    Operation,
    PlaintextType,
    SecretType,
    TensorType,
    Value,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<arrow>->)
  | (?P<percent>%[A-Za-z0-9_]+)
  | (?P<at>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>-?\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<string>"(\\.|[^"\\])*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<punct>[(){}\[\]<>,=:+\-*])
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind: str, text: str, pos: int):
        self.kind = kind
        self.text = text
        self.pos = pos

    def __repr__(self):
        return f"{self.kind}:{self.text!r}"


def _lex(source: str) -> list[_Token]:
    tokens, pos = [], 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            line = source.count("\n", 0, pos) + 1
            raise IrError(f"line {line}: unexpected character {source[pos]!r}")
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(0), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(source)))
    return tokens


_BRACKETED_ATTRS = {"layout": parse_layout, "poly": parse_polynomial, "approx": parse_approx}


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.toks = _lex(source)
        self.i = 0
        self.values: dict[str, Value] = {}

    # -- token plumbing ----------------------------------------------------
    def peek(self, ahead: int = 0) -> _Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def take(self) -> _Token:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def fail(self, message: str) -> None:
        pos = self.peek().pos
        line = self.source.count("\n", 0, pos) + 1
        raise IrError(f"line {line}: {message}")

    def expect(self, kind: str, text: str | None = None) -> _Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            self.fail(f"expected {want!r}, got {tok.text!r}")
        return self.take()

    def accept(self, kind: str, text: str | None = None) -> _Token | None:
        tok = self.peek()
        if tok.kind == kind and (text is None or tok.text == text):
            return self.take()
        return None

    # -- values ------------------------------------------------------------
    def use_value(self, name: str) -> Value:
        v = self.values.get(name)
        if v is None:
            self.fail(f"use of undefined value {name}")
        return v

    def def_value(self, name: str, t: IrType) -> Value:
        if name in self.values:
            self.fail(f"redefinition of value {name}")
        v = Value(t)
        self.values[name] = v
        return v

    # -- types ---------------------------------------------------------------
    def parse_type(self) -> IrType:
        tok = self.expect("ident")
        name = tok.text
        if name == "index":
            return IndexType()
        if re.fullmatch(r"i\d+", name):
            return IntType(int(name[1:]))
        if name in ("f32", "f64"):
            return FloatType(int(name[1:]))
        if name == "tensor":
            self.expect("punct", "<")
            dims = [int(self.expect("number").text)]
            tail = self.expect("ident").text
            parts = tail.split("x")
            if parts[0] != "":
                self.fail(f"bad tensor shape near {tail!r}")
            *more, elt_name = parts[1:]
            for d in more:
                if not d.isdigit():
                    self.fail(f"bad tensor dimension {d!r}")
                dims.append(int(d))
            elt = self._scalar_type_from_name(elt_name)
            self.expect("punct", ">")
            return TensorType(tuple(dims), elt)
        if name == "secret":
            self.expect("punct", "<")
            inner = self.parse_type()
            self.expect("punct", ">")
            return SecretType(inner)
        if name == "pt":
            self.expect("punct", "<")
            inner = self.parse_type()
            self.expect("punct", ">")
            return PlaintextType(inner)
        if name == "ct":
            self.expect("punct", "<")
            inner = self.parse_type()
            self.expect("punct", ",")
            self.expect("ident", "level")
            self.expect("punct", "=")
            level = int(self.expect("number").text)
            self.expect("punct", ",")
            self.expect("ident", "dim")
            self.expect("punct", "=")
            deg = int(self.expect("number").text)
            self.expect("punct", ">")
            return CiphertextType(inner, level, deg)
        self.fail(f"unknown type {name!r}")

    def _scalar_type_from_name(self, name: str) -> IrType:
        if name == "index":
            return IndexType()
        if re.fullmatch(r"i\d+", name):
            return IntType(int(name[1:]))
        if name in ("f32", "f64"):
            return FloatType(int(name[1:]))
        self.fail(f"bad tensor element type {name!r}")

    # -- attributes ----------------------------------------------------------
    def parse_attr_dict(self) -> dict:
        attrs: dict = {}
        self.expect("punct", "{")
        while not self.accept("punct", "}"):
            key = self.expect("ident").text
            if self.accept("punct", "="):
                attrs[key] = self.parse_attr_value()
            else:
                attrs[key] = True  # unit attribute
            if not self.accept("punct", ","):
                self.expect("punct", "}")
                break
        return attrs

    def parse_attr_value(self):
        tok = self.peek()
        if tok.kind == "number":
            self.take()
            if "." in tok.text or "e" in tok.text or "E" in tok.text:
                return float(tok.text)
            return int(tok.text)
        if tok.kind == "string":
            self.take()
            return json.loads(tok.text)
        if tok.kind == "punct" and tok.text == "[":
            self.take()
            out = []
            while not self.accept("punct", "]"):
                out.append(self.parse_attr_value())
                if not self.accept("punct", ","):
                    self.expect("punct", "]")
                    break
            return out
        if tok.kind == "punct" and tok.text == "(":
            return self._capture_affine_map()
        if tok.kind == "ident" and tok.text in _BRACKETED_ATTRS:
            return self._capture_bracketed(tok.text)
        if tok.kind == "ident" and (
            tok.text in ("index", "tensor", "secret", "ct", "pt", "f32", "f64")
            or re.fullmatch(r"i\d+", tok.text)
        ):
            return self.parse_type()
        self.fail(f"bad attribute value near {tok.text!r}")

    def _capture_affine_map(self):
        start = self.peek().pos
        self._skip_balanced("(", ")")
        self.expect("arrow")
        self._skip_balanced("(", ")")
        end = self.toks[self.i - 1].pos + 1
        return parse_affine_map(self.source[start:end])

    def _skip_balanced(self, open_c: str, close_c: str) -> None:
        self.expect("punct", open_c)
        depth = 1
        while depth:
            tok = self.take()
            if tok.kind == "eof":
                self.fail(f"unbalanced {open_c}")
            if tok.kind == "punct" and tok.text == open_c:
                depth += 1
            elif tok.kind == "punct" and tok.text == close_c:
                depth -= 1

    def _capture_bracketed(self, kind: str):
        self.take()  # the keyword
        open_tok = self.expect("punct", "<")
        start = open_tok.pos + 1
        depth = 1
        while depth:
            tok = self.take()
            if tok.kind == "eof":
                self.fail(f"unbalanced {kind}<...>")
            if tok.kind == "punct" and tok.text == "<":
                depth += 1
            elif tok.kind == "punct" and tok.text == ">":
                depth -= 1
        end = self.toks[self.i - 1].pos
        return _BRACKETED_ATTRS[kind](self.source[start:end])

    # -- operations ----------------------------------------------------------
    def parse_op(self) -> Operation:
        result_names: list[str] = []
        if self.peek().kind == "percent":
            save = self.i
            while self.peek().kind == "percent":
                result_names.append(self.take().text)
                if not self.accept("punct", ","):
                    break
            if not self.accept("punct", "="):
                # not results after all (ops with no results don't reach here)
                self.i = save
                result_names = []
        name_tok = self.expect("ident")
        op = Operation(name_tok.text)
        if self.peek().kind == "percent":
            while True:
                op.operands.append(self.use_value(self.take().text))
                if not (
                    self.peek().kind == "punct"
                    and self.peek().text == ","
                    and self.peek(1).kind == "percent"
                ):
                    break
                self.take()
        # "{" right after the operands is always an attr dict; regions are
        # introduced by a parenthesized block-arg list.
        if self.peek().kind == "punct" and self.peek().text == "{":
            op.attributes = self.parse_attr_dict()
        while self.peek().kind == "punct" and self.peek().text == "(":
            op.regions.append(self.parse_region())
        self.expect("punct", ":")
        in_types, out_types = self.parse_type_sig()
        if len(in_types) != len(op.operands):
            self.fail(f"{op.name}: signature lists {len(in_types)} operands, op has {len(op.operands)}")
        for v, t in zip(op.operands, in_types):
            if v.type != t:
                self.fail(f"{op.name}: operand has type {v.type}, signature says {t}")
        if len(out_types) != len(result_names):
            self.fail(f"{op.name}: {len(result_names)} results bound, signature lists {len(out_types)}")
        for rname, t in zip(result_names, out_types):
            op.results.append(self.def_value(rname, t))
        return op

    def parse_region(self) -> Block:
        self.expect("punct", "(")
        block = Block()
        while not self.accept("punct", ")"):
            name = self.expect("percent").text
            self.expect("punct", ":")
            t = self.parse_type()
            block.args.append(self.def_value(name, t))
            if not self.accept("punct", ","):
                self.expect("punct", ")")
                break
        self.expect("punct", "{")
        while not self.accept("punct", "}"):
            block.ops.append(self.parse_op())
        return block

    def parse_type_sig(self) -> tuple[list[IrType], list[IrType]]:
        self.expect("punct", "(")
        ins: list[IrType] = []
        while not self.accept("punct", ")"):
            ins.append(self.parse_type())
            if not self.accept("punct", ","):
                self.expect("punct", ")")
                break
        self.expect("arrow")
        outs: list[IrType] = []
        if self.accept("punct", "("):
            while not self.accept("punct", ")"):
                outs.append(self.parse_type())
                if not self.accept("punct", ","):
                    self.expect("punct", ")")
                    break
        else:
            outs.append(self.parse_type())
        return ins, outs

    # -- functions -----------------------------------------------------------
    def parse_function(self) -> Function:
        self.values = {}
        self.expect("ident", "func")
        name = self.expect("at").text[1:]
        fn = Function(name)
        self.expect("punct", "(")
        while not self.accept("punct", ")"):
            arg_name = self.expect("percent").text
            self.expect("punct", ":")
            t = self.parse_type()
            fn.args.append(self.def_value(arg_name, t))
            if self.peek().kind == "punct" and self.peek().text == "{":
                fn.arg_attrs.append(self.parse_attr_dict())
            else:
                fn.arg_attrs.append({})
            if not self.accept("punct", ","):
                self.expect("punct", ")")
                break
        self.expect("arrow")
        if self.accept("punct", "("):
            while not self.accept("punct", ")"):
                fn.result_types.append(self.parse_type())
                if self.peek().kind == "punct" and self.peek().text == "{":
                    fn.res_attrs.append(self.parse_attr_dict())
                else:
                    fn.res_attrs.append({})
                if not self.accept("punct", ","):
                    self.expect("punct", ")")
                    break
        else:
            fn.result_types.append(self.parse_type())
            fn.res_attrs.append({})
        if self.peek().kind == "punct" and self.peek().text == "{" and self._looks_like_attrs():
            fn.attributes = self.parse_attr_dict()
        self.expect("punct", "{")
        while not self.accept("punct", "}"):
            fn.body.ops.append(self.parse_op())
        return fn

    def _looks_like_attrs(self) -> bool:
        """Disambiguate a function attr dict from the function body."""
        depth = 0
        j = self.i
        while j < len(self.toks):
            tok = self.toks[j]
            if tok.kind == "punct" and tok.text == "{":
                depth += 1
            elif tok.kind == "punct" and tok.text == "}":
                depth -= 1
                if depth == 0:
                    after = self.toks[j + 1] if j + 1 < len(self.toks) else None
                    return after is not None and after.kind == "punct" and after.text == "{"
            j += 1
        return False

    def parse_module(self) -> IrModule:
        module = IrModule()
        while self.peek().kind != "eof":
            module.functions.append(self.parse_function())
        return module


def parse_module(source: str) -> IrModule:
    return _Parser(source).parse_module()


def parse_function(source: str) -> Function:
    m = parse_module(source)
    if len(m.functions) != 1:
        raise IrError("expected exactly one function")
    return m.functions[0]
