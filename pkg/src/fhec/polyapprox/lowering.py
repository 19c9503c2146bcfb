"""Turn non-polynomial ops into polynomials and expand their evaluation.

`approximate-nonpoly` replaces registered non-polynomial ops on secret
floats (max-with-constant, tanh, exp) by `polynomial.eval` carrying a
near-minimax polynomial for the annotated degree and interval.

`lower-polynomial-eval` expands each `polynomial.eval` into explicit
arithmetic using baby-step/giant-step evaluation, which needs on the order
of 2*sqrt(d) non-scalar multiplications instead of the d-1 of naive
monomial evaluation. Multiplications by coefficient constants stay scalar.
"""
from __future__ import annotations

import math
from typing import Callable

from ..ir.attributes import ApproxSpec, StaticPolynomial
from ..ir.cleanup import dce
from ..ir.passes import register_pass
from ..ir.types import (
    Block,
    Function,
    IrError,
    IrModule,
    Operation,
    TensorType,
    Value,
    replace_uses,
)
from ..secret import distribute_generic, hoist_plaintext
from .cf import MONOMIAL_DEGREE_LIMIT, cf_approximate_info
from .chebyshev import monomial_if_stable

# Ops the approximation pass knows how to model as univariate functions.
_APPROXIMABLE = ("arith.maximumf", "math.tanh", "math.exp")


def _region_blocks(op: Operation):
    for block in op.regions:
        yield block
        for inner in block.ops:
            yield from _region_blocks(inner)


def _function_blocks(fn: Function):
    yield fn.body
    for op in fn.body.ops:
        yield from _region_blocks(op)


def _producers(fn: Function) -> dict[int, Operation]:
    out: dict[int, Operation] = {}
    for op in fn.walk():
        for res in op.results:
            out[id(res)] = op
    return out


def _constant_scalar(value: Value, producers: dict[int, Operation]):
    op = producers.get(id(value))
    if op is None or op.name != "arith.constant":
        return None
    raw = op.attributes.get("value")
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    if isinstance(raw, list) and raw and all(v == raw[0] for v in raw):
        return float(raw[0])  # splat tensor behaves like one scalar
    return None


def _argument_annotation(fn: Function) -> ApproxSpec | None:
    for attrs in fn.arg_attrs:
        spec = attrs.get("approx")
        if isinstance(spec, ApproxSpec):
            return spec
    return None


def approximate_nonpoly_ops(
    module: IrModule, defaults: ApproxSpec | None = None
) -> None:
    """Replace secret non-polynomial ops with `polynomial.eval`."""
    for fn in module.functions:
        producers = _producers(fn)
        arg_spec = _argument_annotation(fn)
        for generic in list(fn.body.ops):
            if generic.name != "secret.generic":
                continue
            for block in _region_blocks(generic):
                _approximate_block(fn, block, producers, arg_spec, defaults)


def _approximate_block(
    fn: Function,
    block: Block,
    producers: dict[int, Operation],
    arg_spec: ApproxSpec | None,
    defaults: ApproxSpec | None,
) -> None:
    for op in list(block.ops):
        if op.name not in _APPROXIMABLE:
            continue
        spec = op.attributes.get("approx") or arg_spec or defaults
        if not isinstance(spec, ApproxSpec):
            raise IrError(f"missing approximation annotation for '{op.name}'")
        if op.name == "arith.maximumf":
            bound = _constant_scalar(op.operands[1], producers)
            x = op.operands[0]
            if bound is None:
                bound = _constant_scalar(op.operands[0], producers)
                x = op.operands[1]
            if bound is None:
                raise IrError(
                    "arith.maximumf needs a constant operand to be "
                    "approximated as a polynomial"
                )
            func: Callable[[float], float] = lambda v, c=bound: max(v, c)
        elif op.name == "math.tanh":
            x, func = op.operands[0], math.tanh
        else:
            x, func = op.operands[0], math.exp
        info = cf_approximate_info(func, spec)
        attrs: dict = {"poly": info.poly}
        if info.fallback:
            attrs["experimental"] = True
        replacement = Operation(
            "polynomial.eval",
            operands=[x],
            results=[Value(op.results[0].type)],
            attributes=attrs,
        )
        block.ops[block.ops.index(op)] = replacement
        replace_uses(fn, op.results[0], replacement.results[0])


class _Expander:
    """Emits the arithmetic for one polynomial.eval into a fresh op list."""

    def __init__(self, value_type, slots: int | None):
        self.type = value_type
        self.slots = slots  # element count for splat constants, None = scalar
        self.ops: list[Operation] = []

    def emit(self, name: str, operands: list[Value]) -> Value:
        op = Operation(name, operands=operands, results=[Value(self.type)])
        self.ops.append(op)
        return op.results[0]

    def const(self, c: float) -> Value:
        value = [float(c)] * self.slots if self.slots is not None else float(c)
        op = Operation(
            "arith.constant", results=[Value(self.type)], attributes={"value": value}
        )
        self.ops.append(op)
        return op.results[0]

    def combination(self, coeffs, powers: dict[int, Value]) -> Value:
        """sum_i coeffs[i] * powers[i] with scalar multiplications only."""
        acc: Value | None = None
        for i, c in enumerate(coeffs):
            if c == 0.0 and len(coeffs) > 1:
                continue
            term = self.const(c) if i == 0 else self.emit(
                "arith.mulf", [self.const(c), powers[i]]
            )
            acc = term if acc is None else self.emit("arith.addf", [acc, term])
        return acc if acc is not None else self.const(0.0)


def _monomial_bsgs(ex: _Expander, x: Value, coeffs: tuple[float, ...]) -> Value:
    d = len(coeffs) - 1
    if d == 0:
        return ex.const(coeffs[0])
    if d == 1:
        return ex.combination(coeffs, {1: x})
    k = math.isqrt(d)
    if k * k < d + 1:
        k += 1  # ceil(sqrt(d + 1))
    blocks_needed = -(-(d + 1) // k)
    powers: dict[int, Value] = {1: x}
    for i in range(2, k + 1):
        lo = i // 2
        powers[i] = ex.emit("arith.mulf", [powers[i - lo], powers[lo]])
    giant = powers[k]
    chunks = [coeffs[j * k : (j + 1) * k] for j in range(blocks_needed)]
    acc = ex.combination(chunks[-1], powers)
    for chunk in reversed(chunks[:-1]):
        acc = ex.emit("arith.mulf", [acc, giant])
        acc = ex.emit("arith.addf", [acc, ex.combination(chunk, powers)])
    return acc


def _cheb_divmod(coeffs: list[float], g: int) -> tuple[list[float], list[float]]:
    """Split p = q*T_g + r in the Chebyshev basis, deg p <= 2g-1, deg r < g."""
    d = len(coeffs) - 1
    q = [0.0] * (d - g + 1)
    for k in range(d, g, -1):
        q[k - g] = 2.0 * coeffs[k]
    q[0] = coeffs[g]
    r = list(coeffs[:g])
    # q_i * T_i * T_g contributes q_i/2 at index g-i for i >= 1
    for i in range(1, len(q)):
        r[g - i] -= 0.5 * q[i]
    return q, r


def _chebyshev_bsgs(ex: _Expander, x: Value, poly: StaticPolynomial) -> Value:
    """Chebyshev-basis evaluation with baby T_1..T_{g-1} and squared giants."""
    a, b = poly.interval
    alpha, beta = 2.0 / (b - a), -(a + b) / (b - a)
    t = ex.emit("arith.mulf", [ex.const(alpha), x])
    t = ex.emit("arith.addf", [t, ex.const(beta)])
    d = poly.degree
    g = 1 << max(1, round(math.log2(math.sqrt(d + 1))))
    cheb: dict[int, Value] = {1: t}
    two = ex.const(2.0)
    for i in range(2, g):
        doubled = ex.emit("arith.mulf", [two, ex.emit("arith.mulf", [t, cheb[i - 1]])])
        if i == 2:
            cheb[i] = ex.emit("arith.subf", [doubled, ex.const(1.0)])
        else:
            cheb[i] = ex.emit("arith.subf", [doubled, cheb[i - 2]])
    giants = []
    size = g
    while size <= d:
        half = cheb[size // 2]
        squared = ex.emit("arith.mulf", [half, half])
        cheb[size] = ex.emit(
            "arith.subf", [ex.emit("arith.mulf", [two, squared]), ex.const(1.0)]
        )
        giants.append(size)
        size *= 2

    def evaluate(cs: list[float]) -> Value:
        deg = len(cs) - 1
        if deg < g:
            return ex.combination(cs, cheb)
        giant = max(s for s in giants if s <= deg)
        q, r = _cheb_divmod(cs, giant)
        prod = ex.emit("arith.mulf", [evaluate(q), cheb[giant]])
        return ex.emit("arith.addf", [prod, evaluate(r)])

    return evaluate(list(poly.coeffs))


def lower_polynomial_eval(module: IrModule) -> None:
    """Expand polynomial.eval ops into baby-step/giant-step arithmetic."""
    touched_generic = False
    for fn in module.functions:
        for block in list(_function_blocks(fn)):
            for op in list(block.ops):
                if op.name != "polynomial.eval":
                    continue
                poly: StaticPolynomial = op.attributes["poly"]
                x = op.operands[0]
                ty = x.type
                slots = math.prod(ty.shape) if isinstance(ty, TensorType) else None
                ex = _Expander(ty, slots)
                coeffs: tuple[float, ...] | None = poly.coeffs
                if poly.basis == "chebyshev":
                    coeffs = (
                        monomial_if_stable(poly.coeffs, poly.interval)
                        if poly.degree <= MONOMIAL_DEGREE_LIMIT
                        else None
                    )
                if coeffs is not None:
                    result = _monomial_bsgs(ex, x, coeffs)
                else:
                    result = _chebyshev_bsgs(ex, x, poly)
                at = block.ops.index(op)
                block.ops[at : at + 1] = ex.ops
                replace_uses(fn, op.results[0], result)
                if block is not fn.body:
                    touched_generic = True
    dce(module)
    if touched_generic:
        # restore the one-op-per-region form the layout passes expect
        distribute_generic(module)
        hoist_plaintext(module)
        dce(module)


@register_pass("approximate-nonpoly")
def _approximate_pass(module: IrModule, defaults: str | None = None) -> None:
    spec = _parse_defaults(defaults) if defaults else None
    approximate_nonpoly_ops(module, spec)


def _parse_defaults(text: str) -> ApproxSpec:
    """Parse pass-option defaults like ``degree:5,interval:-1:1``."""
    degree: int | None = None
    interval: tuple[float, float] | None = None
    for part in str(text).split(","):
        key, _, rest = part.strip().partition(":")
        if key == "degree":
            degree = int(rest)
        elif key == "interval":
            lo, _, hi = rest.partition(":")
            interval = (float(lo), float(hi))
        else:
            raise IrError(f"unknown approximation default {key!r}")
    if degree is None or interval is None:
        raise IrError("approximation defaults need both degree and interval")
    return ApproxSpec(degree, interval)


@register_pass("lower-polynomial-eval")
def _lower_pass(module: IrModule) -> None:
    lower_polynomial_eval(module)
