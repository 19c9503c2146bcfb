"""Operation registry: arity, traits, and per-op type rules.

Every op the textual format can express is declared here; the verifier
rejects anything else. Type rules are structural only; whole-module
analyses (levels, noise, layouts) do their own checking.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .attributes import Layout, StaticPolynomial
from .types import (
    CiphertextType,
    FloatType,
    IndexType,
    IntType,
    IrType,
    Operation,
    PlaintextType,
    SecretType,
    TensorType,
    I1,
    INDEX,
    is_float_like,
    is_integer_like,
)

Verify = Callable[[Operation], list[str]]


@dataclass(frozen=True)
class OpSpec:
    name: str
    num_operands: int | None  # None = variadic
    num_results: int | None
    pure: bool = True
    terminator: bool = False
    has_regions: bool = False
    verify: Verify | None = None


REGISTRY: dict[str, OpSpec] = {}


def register(spec: OpSpec) -> None:
    if spec.name in REGISTRY:
        raise ValueError(f"duplicate op registration {spec.name}")
    REGISTRY[spec.name] = spec


def lookup(name: str) -> OpSpec | None:
    return REGISTRY.get(name)


def _t(op: Operation, i: int) -> IrType:
    return op.operands[i].type


def _rt(op: Operation, i: int = 0) -> IrType:
    return op.results[i].type


def _same_elementwise(op: Operation, want_float: bool | None) -> list[str]:
    a, b = _t(op, 0), _t(op, 1)
    if a != b:
        return [f"{op.name}: operand types differ ({a} vs {b})"]
    elt = a.element if isinstance(a, TensorType) else a
    if want_float is True and not is_float_like(elt):
        return [f"{op.name}: requires float operands, got {a}"]
    if want_float is False and not is_integer_like(elt):
        return [f"{op.name}: requires integer operands, got {a}"]
    if _rt(op) != a:
        return [f"{op.name}: result type {_rt(op)} != operand type {a}"]
    return []


def _int_arith(op: Operation) -> list[str]:
    return _same_elementwise(op, want_float=False)


def _float_arith(op: Operation) -> list[str]:
    return _same_elementwise(op, want_float=True)


def _float_unary(op: Operation) -> list[str]:
    t = _t(op, 0)
    elt = t.element if isinstance(t, TensorType) else t
    if not is_float_like(elt):
        return [f"{op.name}: requires a float operand, got {t}"]
    if _rt(op) != t:
        return [f"{op.name}: result type {_rt(op)} != operand type {t}"]
    return []


def _cmpi(op: Operation) -> list[str]:
    errs = []
    a, b = _t(op, 0), _t(op, 1)
    if a != b:
        errs.append(f"cmpi operand types differ ({a} vs {b})")
    if not is_integer_like(a):
        errs.append(f"cmpi requires integer operands, got {a}")
    if _rt(op) != I1:
        errs.append("cmpi result must be i1")
    if op.attributes.get("pred") not in ("eq", "ne", "slt", "sle", "sgt", "sge"):
        errs.append(f"cmpi has bad predicate {op.attributes.get('pred')!r}")
    return errs


def _select(op: Operation) -> list[str]:
    errs = []
    if _t(op, 0) != I1:
        errs.append(f"select condition must be i1, got {_t(op, 0)}")
    if _t(op, 1) != _t(op, 2):
        errs.append("select branch types differ")
    if _rt(op) != _t(op, 1):
        errs.append("select result type mismatch")
    return errs


def _index_cast(op: Operation) -> list[str]:
    a, r = _t(op, 0), _rt(op)
    ok = (isinstance(a, IndexType) and isinstance(r, IntType)) or (
        isinstance(a, IntType) and isinstance(r, IndexType)
    )
    return [] if ok else [f"index_cast between {a} and {r} is invalid"]


def _constant(op: Operation) -> list[str]:
    val = op.attributes.get("value")
    r = _rt(op)
    if isinstance(r, TensorType):
        if not isinstance(val, list):
            return ["tensor constant needs a list value"]
        n = 1
        for d in r.shape:
            n *= d
        if len(val) != n:
            return [f"tensor constant has {len(val)} elements, type wants {n}"]
        return []
    if isinstance(r, (IntType, IndexType)) and not isinstance(val, int):
        return [f"integer constant has non-integer value {val!r}"]
    if isinstance(r, FloatType) and not isinstance(val, (int, float)):
        return [f"float constant has bad value {val!r}"]
    return []


def _extract(op: Operation) -> list[str]:
    t = _t(op, 0)
    errs = []
    if not isinstance(t, TensorType) or len(t.shape) != 1:
        errs.append(f"tensor.extract needs a rank-1 tensor, got {t}")
        return errs
    if _t(op, 1) != INDEX:
        errs.append("tensor.extract index must have index type")
    if _rt(op) != t.element:
        errs.append("tensor.extract result must be the element type")
    return errs


def _insert(op: Operation) -> list[str]:
    v, t, i = _t(op, 0), _t(op, 1), _t(op, 2)
    errs = []
    if not isinstance(t, TensorType) or len(t.shape) != 1:
        errs.append(f"tensor.insert needs a rank-1 tensor, got {t}")
        return errs
    if v != t.element:
        errs.append("tensor.insert value type must match element type")
    if i != INDEX:
        errs.append("tensor.insert index must have index type")
    if _rt(op) != t:
        errs.append("tensor.insert result type mismatch")
    return errs


def _matvec(op: Operation) -> list[str]:
    m, v = _t(op, 0), _t(op, 1)
    if not (isinstance(m, TensorType) and len(m.shape) == 2):
        return [f"matvec needs a rank-2 matrix, got {m}"]
    if not (isinstance(v, TensorType) and len(v.shape) == 1):
        return [f"matvec needs a rank-1 vector, got {v}"]
    errs = []
    if m.shape[1] != v.shape[0]:
        errs.append(f"matvec shapes disagree: {m} x {v}")
    if m.element != v.element:
        errs.append("matvec element types disagree")
    want = TensorType((m.shape[0],), m.element)
    if _rt(op) != want:
        errs.append(f"matvec result must be {want}, got {_rt(op)}")
    return errs


def _rotate(op: Operation) -> list[str]:
    t = _t(op, 0)
    errs = []
    if not isinstance(t, TensorType) or len(t.shape) != 1:
        errs.append(f"rotate needs a rank-1 tensor, got {t}")
    if _rt(op) != t:
        errs.append("rotate result type mismatch")
    if not isinstance(op.attributes.get("amount"), int):
        errs.append("rotate needs an integer 'amount' attribute")
    return errs


def _reduce(op: Operation) -> list[str]:
    t = _t(op, 0)
    errs = []
    if not isinstance(t, TensorType) or len(t.shape) != 1:
        errs.append(f"reduce needs a rank-1 tensor, got {t}")
        return errs
    if op.attributes.get("kind") not in ("add", "mul"):
        errs.append(f"reduce has bad kind {op.attributes.get('kind')!r}")
    if _rt(op) != t.element:
        errs.append("reduce result must be the element type")
    return errs


def _convert_layout(op: Operation) -> list[str]:
    errs = []
    if _rt(op) != _t(op, 0):
        errs.append("convert_layout must preserve the value type")
    for key in ("from", "to"):
        if not isinstance(op.attributes.get(key), Layout):
            errs.append(f"convert_layout needs a '{key}' layout attribute")
    return errs


def _assign_layout(op: Operation) -> list[str]:
    lay = op.attributes.get("layout")
    if not isinstance(lay, Layout):
        return ["assign_layout needs a 'layout' attribute"]
    r = _rt(op)
    if r == _t(op, 0):
        return []  # annotation form: packing happens at slot materialization
    if not isinstance(r, TensorType):
        return ["assign_layout result must be a tensor"]
    if len(r.shape) != lay.num_ciphertext_dims + 1:
        return [
            f"assign_layout result rank {len(r.shape)} does not match layout "
            f"({lay.num_ciphertext_dims} ciphertext dims + slots)"
        ]
    return []


def _slice(op: Operation) -> list[str]:
    t = _t(op, 0)
    if not (isinstance(t, TensorType) and len(t.shape) == 2):
        return [f"slice needs a rank-2 tensor, got {t}"]
    errs = []
    idx = op.attributes.get("index")
    if not isinstance(idx, int) or not 0 <= idx < t.shape[0]:
        errs.append(f"slice index {idx!r} out of range for {t}")
    if _rt(op) != TensorType((t.shape[1],), t.element):
        errs.append("slice result type mismatch")
    return errs


def _retype(op: Operation) -> list[str]:
    errs = []
    if _rt(op) != _t(op, 0):
        errs.append("retype must preserve the value type")
    if not isinstance(op.attributes.get("layout"), Layout):
        errs.append("retype needs a 'layout' attribute")
    return errs


def _generic(op: Operation) -> list[str]:
    if len(op.regions) != 1:
        return ["secret.generic needs exactly one region"]
    block = op.regions[0]
    errs = []
    if len(block.args) != len(op.operands):
        errs.append("secret.generic block args must match operands")
    for i, (arg, operand) in enumerate(zip(block.args, op.operands)):
        inner = operand.type
        if isinstance(inner, SecretType):
            inner = inner.inner
        if arg.type != inner:
            errs.append(
                f"secret.generic arg {i} type {arg.type} does not match "
                f"operand payload {inner}"
            )
    if not block.ops or block.ops[-1].name != "secret.yield":
        errs.append("secret.generic region must end in secret.yield")
        return errs
    yield_op = block.ops[-1]
    if len(yield_op.operands) != len(op.results):
        errs.append("secret.yield operand count must match generic results")
        return errs
    for i, (y, r) in enumerate(zip(yield_op.operands, op.results)):
        want = r.type.inner if isinstance(r.type, SecretType) else r.type
        if y.type != want:
            errs.append(
                f"secret.generic result {i}: yield type {y.type} vs payload {want}"
            )
    return errs


def _conceal(op: Operation) -> list[str]:
    r = _rt(op)
    if not isinstance(r, SecretType) or r.inner != _t(op, 0):
        return [f"conceal must produce secret<{_t(op, 0)}>, got {r}"]
    return []


def _loop_common(op: Operation, n_iter: int) -> list[str]:
    block = op.regions[0]
    errs = []
    if len(block.args) != 1 + n_iter:
        errs.append(f"{op.name} region needs induction arg plus {n_iter} iter args")
        return errs
    if block.args[0].type != INDEX:
        errs.append(f"{op.name} induction variable must have index type")
    if not block.ops or not block.ops[-1].name.endswith("yield"):
        errs.append(f"{op.name} region must end in a yield")
        return errs
    yield_op = block.ops[-1]
    if len(yield_op.operands) != n_iter:
        errs.append(f"{op.name} yield must carry {n_iter} values")
        return errs
    for i in range(n_iter):
        if yield_op.operands[i].type != block.args[1 + i].type:
            errs.append(f"{op.name} iter arg {i} type mismatch at yield")
        if op.results[i].type != block.args[1 + i].type:
            errs.append(f"{op.name} result {i} type mismatch")
    return errs


def _affine_for(op: Operation) -> list[str]:
    if len(op.regions) != 1:
        return ["affine.for needs exactly one region"]
    errs = []
    for key in ("lower", "upper"):
        if not isinstance(op.attributes.get(key), int):
            errs.append(f"affine.for needs integer '{key}' attribute")
    step = op.attributes.get("step", 1)
    if not isinstance(step, int) or step <= 0:
        errs.append("affine.for step must be a positive integer")
    if errs:
        return errs
    n_iter = len(op.operands)
    for i in range(n_iter):
        if op.operands[i].type != op.regions[0].args[1 + i].type:
            errs.append(f"affine.for init {i} type mismatch")
    return errs + _loop_common(op, n_iter)


def _scf_for(op: Operation) -> list[str]:
    if len(op.regions) != 1:
        return ["scf.for needs exactly one region"]
    if not op.operands:
        return ["scf.for needs a bound operand"]
    errs = []
    if not is_integer_like(_t(op, 0)):
        errs.append(f"scf.for bound must be integer-like, got {_t(op, 0)}")
    n_iter = len(op.operands) - 1
    for i in range(n_iter):
        if op.operands[1 + i].type != op.regions[0].args[1 + i].type:
            errs.append(f"scf.for init {i} type mismatch")
    return errs + _loop_common(op, n_iter)


def _scf_if(op: Operation) -> list[str]:
    errs = []
    if len(op.regions) != 2:
        return ["scf.if needs a then and an else region"]
    if _t(op, 0) != I1:
        errs.append("scf.if condition must be i1")
    for which, block in zip(("then", "else"), op.regions):
        if block.args:
            errs.append(f"scf.if {which} region takes no arguments")
        if not block.ops or block.ops[-1].name != "scf.yield":
            errs.append(f"scf.if {which} region must end in scf.yield")
            return errs
        y = block.ops[-1]
        if len(y.operands) != len(op.results):
            errs.append(f"scf.if {which} yield arity mismatch")
            continue
        for i, v in enumerate(y.operands):
            if v.type != op.results[i].type:
                errs.append(f"scf.if {which} yield type mismatch at result {i}")
    return errs


def _mgmt_unary(op: Operation) -> list[str]:
    t = _t(op, 0)
    if not isinstance(t, (SecretType, CiphertextType)):
        return [f"{op.name} applies to secret or ciphertext values, got {t}"]
    if op.name == "mgmt.mod_reduce" and isinstance(t, CiphertextType):
        pass  # level change is checked by the level analysis
    elif _rt(op).__class__ is not t.__class__:
        return [f"{op.name} result kind mismatch"]
    return []


def _poly_eval(op: Operation) -> list[str]:
    errs = []
    if not isinstance(op.attributes.get("poly"), StaticPolynomial):
        errs.append("polynomial.eval needs a 'poly' attribute")
    t = _t(op, 0)
    elt = t.element if isinstance(t, TensorType) else t
    if not is_float_like(elt):
        errs.append(f"polynomial.eval requires float input, got {t}")
    if _rt(op) != t:
        errs.append("polynomial.eval result type mismatch")
    return errs


def _batch(op: Operation) -> list[str]:
    inner = op.attributes.get("inner")
    width = op.attributes.get("width")
    if not isinstance(inner, str) or lookup(inner) is None:
        return [f"batch has unknown inner op {inner!r}"]
    if not isinstance(width, int) or width < 1:
        return ["batch needs a positive integer 'width'"]
    spec = lookup(inner)
    if spec.num_operands is None or spec.has_regions:
        return [f"batch cannot wrap op {inner}"]
    errs = []
    if len(op.operands) != width * spec.num_operands:
        errs.append("batch operand count does not match width")
    if len(op.results) != width * (spec.num_results or 0):
        errs.append("batch result count does not match width")
    return errs


def _ct_binary(op: Operation) -> list[str]:
    a, b = _t(op, 0), _t(op, 1)
    if not isinstance(a, CiphertextType) or not isinstance(b, CiphertextType):
        return [f"{op.name} needs two ciphertext operands"]
    errs = []
    if a.inner != b.inner:
        errs.append(f"{op.name}: payload types differ ({a.inner} vs {b.inner})")
    if a.level != b.level:
        errs.append(f"{op.name}: operand levels differ ({a.level} vs {b.level})")
    if not isinstance(_rt(op), CiphertextType):
        errs.append(f"{op.name} must produce a ciphertext")
    return errs


def _ct_plain(op: Operation) -> list[str]:
    a = _t(op, 0)
    if not isinstance(a, CiphertextType):
        return [f"{op.name} first operand must be a ciphertext"]
    b = _t(op, 1)
    if not isinstance(b, (TensorType, PlaintextType)):
        return [f"{op.name} second operand must be plaintext data, got {b}"]
    if not isinstance(_rt(op), CiphertextType):
        return [f"{op.name} must produce a ciphertext"]
    return []


def _ct_unary(op: Operation) -> list[str]:
    if not isinstance(_t(op, 0), CiphertextType):
        return [f"{op.name} operand must be a ciphertext"]
    if not isinstance(_rt(op), CiphertextType):
        return [f"{op.name} must produce a ciphertext"]
    return []


def _ct_rotate(op: Operation) -> list[str]:
    errs = _ct_unary(op)
    if not isinstance(op.attributes.get("amount"), int):
        errs.append(f"{op.name} needs an integer 'amount' attribute")
    return errs


def _encode(op: Operation) -> list[str]:
    if not isinstance(op.attributes.get("layout"), Layout):
        return ["client.encode needs a 'layout' attribute"]
    if not isinstance(_rt(op), PlaintextType):
        return ["client.encode must produce a plaintext"]
    return []


def _decode(op: Operation) -> list[str]:
    if not isinstance(op.attributes.get("layout"), Layout):
        return ["client.decode needs a 'layout' attribute"]
    if not isinstance(_t(op, 0), PlaintextType):
        return ["client.decode consumes a plaintext"]
    return []


def _init_registry() -> None:
    ops = [
        OpSpec("return", None, 0, pure=False, terminator=True),
        OpSpec("arith.constant", 0, 1, verify=_constant),
        OpSpec("arith.add", 2, 1, verify=_int_arith),
        OpSpec("arith.sub", 2, 1, verify=_int_arith),
        OpSpec("arith.mul", 2, 1, verify=_int_arith),
        OpSpec("arith.addf", 2, 1, verify=_float_arith),
        OpSpec("arith.subf", 2, 1, verify=_float_arith),
        OpSpec("arith.mulf", 2, 1, verify=_float_arith),
        OpSpec("arith.maximumf", 2, 1, verify=_float_arith),
        OpSpec("math.tanh", 1, 1, verify=_float_unary),
        OpSpec("math.exp", 1, 1, verify=_float_unary),
        OpSpec("arith.cmpi", 2, 1, verify=_cmpi),
        OpSpec("arith.select", 3, 1, verify=_select),
        OpSpec("arith.index_cast", 1, 1, verify=_index_cast),
        OpSpec("tensor.extract", 2, 1, verify=_extract),
        OpSpec("tensor.insert", 3, 1, verify=_insert),
        OpSpec("linalg.matvec", 2, 1, verify=_matvec),
        OpSpec("tensor_ext.rotate", 1, 1, verify=_rotate),
        OpSpec("tensor_ext.reduce", 1, 1, verify=_reduce),
        OpSpec("tensor_ext.convert_layout", 1, 1, verify=_convert_layout),
        OpSpec("tensor_ext.assign_layout", 1, 1, verify=_assign_layout),
        OpSpec("tensor_ext.slice", 1, 1, verify=_slice),
        OpSpec("tensor_ext.retype", 1, 1, verify=_retype),
        OpSpec("secret.generic", None, None, has_regions=True, verify=_generic),
        OpSpec("secret.yield", None, 0, pure=False, terminator=True),
        OpSpec("secret.conceal", 1, 1, verify=_conceal),
        OpSpec("affine.for", None, None, has_regions=True, verify=_affine_for),
        OpSpec("affine.yield", None, 0, pure=False, terminator=True),
        OpSpec("scf.for", None, None, has_regions=True, verify=_scf_for),
        OpSpec("scf.yield", None, 0, pure=False, terminator=True),
        OpSpec("scf.if", 1, None, has_regions=True, verify=_scf_if),
        OpSpec("mgmt.relinearize", 1, 1, verify=_mgmt_unary),
        OpSpec("mgmt.mod_reduce", 1, 1, verify=_mgmt_unary),
        OpSpec("mgmt.adjust_scale", 1, 1, verify=_mgmt_unary),
        OpSpec("mgmt.bootstrap", 1, 1, pure=False, verify=_mgmt_unary),
        OpSpec("polynomial.eval", 1, 1, verify=_poly_eval),
        OpSpec("parallel.batch", None, None, verify=_batch),
        OpSpec("debug.handler", 1, 0, pure=False),
    ]
    for scheme in ("bgv", "ckks_sim"):
        ops += [
            OpSpec(f"{scheme}.add", 2, 1, verify=_ct_binary),
            OpSpec(f"{scheme}.sub", 2, 1, verify=_ct_binary),
            OpSpec(f"{scheme}.mul", 2, 1, verify=_ct_binary),
            OpSpec(f"{scheme}.add_plain", 2, 1, verify=_ct_plain),
            OpSpec(f"{scheme}.sub_plain", 2, 1, verify=_ct_plain),
            OpSpec(f"{scheme}.mul_plain", 2, 1, verify=_ct_plain),
            OpSpec(f"{scheme}.rotate", 1, 1, verify=_ct_rotate),
            OpSpec(f"{scheme}.relinearize", 1, 1, verify=_ct_unary),
            OpSpec(f"{scheme}.mod_reduce", 1, 1, verify=_ct_unary),
            OpSpec(f"{scheme}.scale_adjust", 1, 1, verify=_ct_unary),
        ]
    ops += [
        OpSpec("client.encode", 1, 1, verify=_encode),
        OpSpec("client.encrypt", 1, 1, pure=False),
        OpSpec("client.decrypt", 1, 1, pure=False),
        OpSpec("client.decode", 1, 1, verify=_decode),
    ]
    for spec in ops:
        register(spec)


_init_registry()
