"""Quasi-affine index expressions and maps.

Grammar (used inside layout attributes):

    map   ::= "(" dim ("," dim)* ")" "->" "(" expr ("," expr)* ")"
    expr  ::= term (("+" | "-") term)*
    term  ::= factor (("*" factor) | ("mod" | "floordiv" | "ceildiv") literal)*
    factor::= literal | dim | "-" factor | "(" expr ")"

Divisors of mod/floordiv/ceildiv must be positive literals; mod is the
mathematical residue in [0, divisor).
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .types import IrError


class AffineExpr:
    def eval(self, dims: tuple[int, ...]) -> int:
        raise NotImplementedError

    def dims_used(self) -> set[int]:
        raise NotImplementedError


@dataclass(frozen=True)
class Dim(AffineExpr):
    index: int

    def eval(self, dims):
        return dims[self.index]

    def dims_used(self):
        return {self.index}

    def __str__(self):
        return f"d{self.index}"


@dataclass(frozen=True)
class Const(AffineExpr):
    value: int

    def eval(self, dims):
        return self.value

    def dims_used(self):
        return set()

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class BinExpr(AffineExpr):
    kind: str  # + - * mod floordiv ceildiv
    lhs: AffineExpr
    rhs: AffineExpr

    def eval(self, dims):
        a = self.lhs.eval(dims)
        b = self.rhs.eval(dims)
        if self.kind == "+":
            return a + b
        if self.kind == "-":
            return a - b
        if self.kind == "*":
            return a * b
        if b <= 0:
            raise IrError(f"affine {self.kind} requires a positive divisor, got {b}")
        if self.kind == "mod":
            return a % b
        if self.kind == "floordiv":
            return a // b
        if self.kind == "ceildiv":
            return -((-a) // b)
        raise IrError(f"unknown affine operator {self.kind}")

    def dims_used(self):
        return self.lhs.dims_used() | self.rhs.dims_used()

    def __str__(self):
        lhs, rhs = self.lhs, self.rhs
        ls = _wrap(lhs, self.kind, left=True)
        rs = _wrap(rhs, self.kind, left=False)
        if self.kind in ("mod", "floordiv", "ceildiv"):
            return f"{ls} {self.kind} {rs}"
        return f"{ls} {self.kind} {rs}"


_PREC = {"+": 1, "-": 1, "*": 2, "mod": 2, "floordiv": 2, "ceildiv": 2}


def _wrap(e: AffineExpr, parent: str, left: bool) -> str:
    s = str(e)
    if isinstance(e, BinExpr):
        pp, cp = _PREC[parent], _PREC[e.kind]
        if cp < pp or (cp == pp and not left):
            return f"({s})"
        # mod/div bind their left operand tightly; sums need parens there
        if parent in ("mod", "floordiv", "ceildiv") and left and _PREC[e.kind] < 2:
            return f"({s})"
    return s


@dataclass(frozen=True)
class AffineMap:
    num_dims: int
    exprs: tuple[AffineExpr, ...]

    def __post_init__(self):
        for e in self.exprs:
            bad = [d for d in e.dims_used() if d >= self.num_dims]
            if bad:
                raise IrError(f"affine expr references undeclared dim d{bad[0]}")

    def eval(self, dims: tuple[int, ...]) -> tuple[int, ...]:
        if len(dims) != self.num_dims:
            raise IrError(
                f"affine map expects {self.num_dims} dims, got {len(dims)}"
            )
        return tuple(e.eval(tuple(dims)) for e in self.exprs)

    def __str__(self):
        ds = ", ".join(f"d{i}" for i in range(self.num_dims))
        es = ", ".join(str(e) for e in self.exprs)
        return f"({ds}) -> ({es})"


_TOKEN_RE = re.compile(r"\s*(d\d+|\d+|mod|floordiv|ceildiv|->|[(),+\-*])")


def _tokenize(text: str) -> list[str]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise IrError(f"bad affine map syntax near '{text[pos:pos+16]}'")
        out.append(m.group(1))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens: list[str], dim_names: dict[str, int]):
        self.toks = tokens
        self.pos = 0
        self.dims = dim_names

    def peek(self) -> str | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self, expect: str | None = None) -> str:
        if self.pos >= len(self.toks):
            raise IrError("unexpected end of affine expression")
        tok = self.toks[self.pos]
        if expect is not None and tok != expect:
            raise IrError(f"expected '{expect}' in affine map, got '{tok}'")
        self.pos += 1
        return tok

    def expr(self) -> AffineExpr:
        e = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            e = BinExpr(op, e, self.term())
        return e

    def term(self) -> AffineExpr:
        e = self.factor()
        while self.peek() in ("*", "mod", "floordiv", "ceildiv"):
            op = self.take()
            rhs = self.factor()
            if op != "*" and not isinstance(rhs, Const):
                raise IrError(f"affine {op} requires a literal divisor")
            if op == "*" and not (
                isinstance(rhs, Const) or isinstance(e, Const)
            ):
                raise IrError("affine * requires one literal operand")
            e = BinExpr(op, e, rhs)
        return e

    def factor(self) -> AffineExpr:
        tok = self.take()
        if tok == "-":
            inner = self.factor()
            return BinExpr("*", Const(-1), inner) if not isinstance(inner, Const) else Const(-inner.value)
        if tok == "(":
            e = self.expr()
            self.take(")")
            return e
        if tok in self.dims:
            return Dim(self.dims[tok])
        if tok.isdigit():
            return Const(int(tok))
        raise IrError(f"unexpected token '{tok}' in affine expression")


def parse_affine_map(text: str) -> AffineMap:
    toks = _tokenize(text)
    p = _Parser(toks, {})
    p.take("(")
    dim_names: dict[str, int] = {}
    while p.peek() != ")":
        name = p.take()
        if not re.fullmatch(r"d\d+", name):
            raise IrError(f"bad dim name '{name}' in affine map")
        if name in dim_names:
            raise IrError(f"duplicate dim '{name}'")
        dim_names[name] = len(dim_names)
        if p.peek() == ",":
            p.take()
    p.take(")")
    p.take("->")
    p.take("(")
    p.dims = dim_names
    exprs = []
    while True:
        exprs.append(p.expr())
        if p.peek() == ",":
            p.take()
            continue
        break
    p.take(")")
    if p.peek() is not None:
        raise IrError(f"trailing tokens in affine map: '{p.peek()}'")
    return AffineMap(len(dim_names), tuple(exprs))
