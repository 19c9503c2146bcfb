"""Core IR data structures: types, values, operations, functions, modules."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterator


class IrError(Exception):
    """Raised for malformed IR, failed verification, or bad pass input."""

    def __init__(self, diagnostics: list[str] | str):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = diagnostics
        super().__init__("; ".join(diagnostics))


@dataclass(frozen=True)
class IrType:
    def __str__(self) -> str:  # pragma: no cover - overridden
        raise NotImplementedError


@dataclass(frozen=True)
class IntType(IrType):
    width: int

    def __str__(self) -> str:
        return f"i{self.width}"


@dataclass(frozen=True)
class FloatType(IrType):
    width: int

    def __str__(self) -> str:
        return f"f{self.width}"


@dataclass(frozen=True)
class IndexType(IrType):
    def __str__(self) -> str:
        return "index"


@dataclass(frozen=True)
class TensorType(IrType):
    shape: tuple[int, ...]
    element: IrType

    def __str__(self) -> str:
        dims = "x".join(str(d) for d in self.shape)
        return f"tensor<{dims}x{self.element}>"


@dataclass(frozen=True)
class SecretType(IrType):
    inner: IrType

    def __str__(self) -> str:
        return f"secret<{self.inner}>"


@dataclass(frozen=True)
class CiphertextType(IrType):
    """Scheme-level ciphertext carrying its plaintext-semantic payload type."""

    inner: IrType
    level: int
    key_degree: int

    def __str__(self) -> str:
        return f"ct<{self.inner}, level = {self.level}, dim = {self.key_degree}>"


@dataclass(frozen=True)
class PlaintextType(IrType):
    inner: IrType

    def __str__(self) -> str:
        return f"pt<{self.inner}>"


I1 = IntType(1)
I16 = IntType(16)
I32 = IntType(32)
I64 = IntType(64)
F32 = FloatType(32)
F64 = FloatType(64)
INDEX = IndexType()


def is_integer_like(t: IrType) -> bool:
    return isinstance(t, (IntType, IndexType))


def is_float_like(t: IrType) -> bool:
    return isinstance(t, FloatType)


def element_type(t: IrType) -> IrType:
    """Scalar element of a tensor type, or the type itself for scalars."""
    return t.element if isinstance(t, TensorType) else t


def strip_secret(t: IrType) -> IrType:
    return t.inner if isinstance(t, SecretType) else t


_value_ids = itertools.count()


@dataclass(eq=False)
class Value:
    """SSA value. Identity-based; `uid` is only used for printing maps."""

    type: IrType
    uid: int = field(default_factory=lambda: next(_value_ids))

    def __repr__(self) -> str:
        return f"Value(%{self.uid}: {self.type})"


@dataclass
class Block:
    """Single basic block: ordered ops plus block arguments (region inputs)."""

    args: list[Value] = field(default_factory=list)
    ops: list[Operation] = field(default_factory=list)


@dataclass
class Operation:
    name: str
    operands: list[Value] = field(default_factory=list)
    results: list[Value] = field(default_factory=list)
    attributes: dict[str, Any] = field(default_factory=dict)
    regions: list[Block] = field(default_factory=list)

    @property
    def result(self) -> Value:
        if len(self.results) != 1:
            raise IrError(f"op {self.name} has {len(self.results)} results, expected 1")
        return self.results[0]

    def walk(self) -> Iterator["Operation"]:
        """This op, then every op in nested regions, depth-first in order."""
        yield self
        for block in self.regions:
            for op in block.ops:
                yield from op.walk()


@dataclass
class Function:
    name: str
    args: list[Value] = field(default_factory=list)
    result_types: list[IrType] = field(default_factory=list)
    body: Block = field(default_factory=Block)
    arg_attrs: list[dict[str, Any]] = field(default_factory=list)
    res_attrs: list[dict[str, Any]] = field(default_factory=list)
    attributes: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        while len(self.arg_attrs) < len(self.args):
            self.arg_attrs.append({})
        while len(self.res_attrs) < len(self.result_types):
            self.res_attrs.append({})

    def walk(self) -> Iterator[Operation]:
        for op in self.body.ops:
            yield from op.walk()


@dataclass
class IrModule:
    functions: list[Function] = field(default_factory=list)

    def get_function(self, name: str) -> Function:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise IrError(f"no function named @{name}")

    def walk(self) -> Iterator[Operation]:
        for fn in self.functions:
            yield from fn.walk()

    @property
    def main(self) -> Function:
        """The first non-helper function (helpers contain '__' in the name)."""
        for fn in self.functions:
            if "__" not in fn.name:
                return fn
        return self.functions[0]


def replace_uses(fn: Function, old: Value, new: Value) -> None:
    """Rewrite every operand use of `old` in `fn` to `new`."""
    for op in fn.walk():
        for i, v in enumerate(op.operands):
            if v is old:
                op.operands[i] = new
