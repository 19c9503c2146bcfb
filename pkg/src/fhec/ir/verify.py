"""Structural verification of modules: SSA scoping, arity, per-op invariants."""
from __future__ import annotations

from .registry import lookup
from .types import Block, Function, IrError, IrModule

# Which region terminators are legal under which parent op.
_TERMINATOR_PARENTS = {
    "secret.yield": {"secret.generic"},
    "affine.yield": {"affine.for"},
    "scf.yield": {"scf.for", "scf.if"},
    "return": {None},  # function body only
}


class _Verifier:
    def __init__(self):
        self.diags: list[str] = []
        self.defined: set[int] = set()  # ids of every Value defined so far

    def error(self, where: str, message: str) -> None:
        self.diags.append(f"{where}: {message}")

    def define(self, where: str, value) -> None:
        if id(value) in self.defined:
            self.error(where, "value defined more than once")
        self.defined.add(id(value))

    def run(self, module: IrModule) -> list[str]:
        seen_names = set()
        for fn in module.functions:
            if fn.name in seen_names:
                self.error(f"func @{fn.name}", "duplicate function name")
            seen_names.add(fn.name)
        for fn in module.functions:
            self.check_function(fn)
        return self.diags

    def check_function(self, fn: Function) -> None:
        where = f"func @{fn.name}"
        scope: set[int] = set()
        for arg in fn.args:
            self.define(where, arg)
            scope.add(id(arg))
        self.check_block(fn.body, scope, where, parent=None)
        if not fn.body.ops:
            self.error(where, "empty body")
            return
        last = fn.body.ops[-1]
        if last.name != "return":
            self.error(where, f"last op is {last.name!r}, expected return")
        elif [v.type for v in last.operands] != list(fn.result_types):
            self.error(
                where,
                "return types "
                f"{[str(v.type) for v in last.operands]} do not match declared "
                f"{[str(t) for t in fn.result_types]}",
            )

    def check_block(
        self, block: Block, scope: set[int], where: str, parent: str | None
    ) -> None:
        for pos, op in enumerate(block.ops):
            op_where = f"{where}: {op.name}"
            spec = lookup(op.name)
            if spec is None:
                self.error(op_where, "unknown operation")
                continue
            if spec.terminator:
                if pos != len(block.ops) - 1:
                    self.error(op_where, "terminator in the middle of a block")
                allowed = _TERMINATOR_PARENTS.get(op.name)
                if allowed is not None and parent not in allowed:
                    ctx = parent or "a function body"
                    self.error(op_where, f"not a valid terminator inside {ctx}")
            if spec.num_operands is not None and len(op.operands) != spec.num_operands:
                self.error(
                    op_where,
                    f"expected {spec.num_operands} operands, got {len(op.operands)}",
                )
            if spec.num_results is not None and len(op.results) != spec.num_results:
                self.error(
                    op_where,
                    f"expected {spec.num_results} results, got {len(op.results)}",
                )
            if spec.has_regions and not op.regions:
                self.error(op_where, "expected at least one region")
                continue
            if not spec.has_regions and op.regions:
                self.error(op_where, "op does not take regions")
            for operand in op.operands:
                if id(operand) not in scope:
                    self.error(op_where, "operand is not defined at this point")
            for region in op.regions:
                inner = set(scope)  # regions see values from enclosing scopes
                for arg in region.args:
                    self.define(op_where, arg)
                    inner.add(id(arg))
                self.check_block(region, inner, op_where, parent=op.name)
            for result in op.results:
                self.define(op_where, result)
                scope.add(id(result))
            if spec.verify is not None:
                try:
                    for msg in spec.verify(op):
                        self.error(op_where, msg)
                except (IndexError, AttributeError):
                    self.error(op_where, "malformed op (arity or type shape)")


def verify_module(module: IrModule, raise_on_error: bool = True) -> list[str]:
    """Check a whole module; returns diagnostics (raises IrError by default)."""
    diags = _Verifier().run(module)
    if diags and raise_on_error:
        raise IrError(diags)
    return diags
