"""SSA intermediate representation: types, ops, textual format, verification."""

from .affine import AffineExpr, AffineMap, BinExpr, Const, Dim, parse_affine_map
from .attributes import (
    Alignment,
    ApproxSpec,
    Layout,
    StaticPolynomial,
    chebyshev_points,
    parse_approx,
    parse_layout,
    parse_polynomial,
)
from .parser import parse_function, parse_module
from .printer import format_attr, print_module, print_op
from .registry import OpSpec, lookup, register
from .types import (
    F32,
    F64,
    I1,
    I16,
    I32,
    I64,
    INDEX,
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
    element_type,
    is_float_like,
    is_integer_like,
    replace_uses,
    strip_secret,
)
from .verify import verify_module

__all__ = [
    "AffineExpr",
    "AffineMap",
    "Alignment",
    "ApproxSpec",
    "BinExpr",
    "Block",
    "CiphertextType",
    "Const",
    "Dim",
    "F32",
    "F64",
    "FloatType",
    "Function",
    "I1",
    "I16",
    "I32",
    "I64",
    "INDEX",
    "IndexType",
    "IntType",
    "IrError",
    "IrModule",
    "IrType",
    "Layout",
    "Operation",
    "OpSpec",
    "PlaintextType",
    "SecretType",
    "StaticPolynomial",
    "TensorType",
    "Value",
    "chebyshev_points",
    "element_type",
    "format_attr",
    "is_float_like",
    "is_integer_like",
    "lookup",
    "parse_affine_map",
    "parse_approx",
    "parse_function",
    "parse_layout",
    "parse_module",
    "parse_polynomial",
    "print_module",
    "print_op",
    "register",
    "replace_uses",
    "strip_secret",
    "verify_module",
]
