"""Optimal relinearization placement.

Relinearizations are expensive, and one per multiplication (the insertion
baseline) is often more than needed: a single relinearization after an add
of two products serves both, and values that never reach a rotation or a
function result may stay at key degree 2 for a while.  This pass re-places
``mgmt.relinearize`` ops to minimize their number subject to:

* fresh ciphertexts have key degree 1; ct-ct multiplication adds the
  operand degrees; add/sub take the max; everything else passes through;
* every produced degree stays <= MAX_KEY_DEGREE;
* rotation operands and function results must have key degree 1.

One binary variable per candidate insertion point ("relinearize right after
this op"), solved exactly by depth-first branch-and-bound with constraint
propagation.  No external solver; the search is sequential, deterministic,
and capped by a node budget — if the budget is exhausted the module is left
with its existing (feasible) placement and a warning is issued.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

from .ir.passes import register_pass
from .ir.types import Function, IrModule, SecretType, Value
from .mgmt import Site, _MUL_OPS, _insert_after, _return_op, function_sites, site_degree

MAX_KEY_DEGREE = 3
DEFAULT_NODE_BUDGET = 10**6


@dataclass
class RelinProblem:
    """Binary program for one function's relinearization placement.

    `vars` are the candidate insertion sites, in program order.  `evaluate`
    maps an assignment vector (1 = relinearize after that site) to
    (feasible, relin count); the rest of the pass — and the brute-force
    check in the tests — go through this single definition of the
    constraints and objective.
    """

    fn: Function
    vars: list[Site]
    evaluate: Callable[[tuple[int, ...]], tuple[bool, int]]


def build_problem(fn: Function) -> RelinProblem:
    """Formulate placement for `fn`, ignoring already-present relins."""
    sites = function_sites(fn)

    # view of the dataflow with existing relinearizations removed
    resolved: dict[int, Value] = {}

    def res(v: Value) -> Value:
        return resolved.get(v.uid, v)

    compute: list[Site] = []
    producer: dict[int, Site] = {}
    for s in sites:
        if s.kind == "mgmt.relinearize":
            resolved[s.result.uid] = res(s.secret_in[0])
            continue
        compute.append(s)
        producer[s.result.uid] = s

    # degrees with no relinearization anywhere: candidates are the sites
    # that could produce degree > 1
    deg0: dict[int, int] = {}

    def deg_no_relin(v: Value) -> int:
        return deg0.get(res(v).uid, 1)

    for s in compute:
        deg0[s.result.uid] = site_degree(s.kind, [deg_no_relin(v) for v in s.secret_in])
    cands = [s for s in compute if deg0[s.result.uid] > 1]
    index = {id(s): i for i, s in enumerate(cands)}

    ret = _return_op(fn)
    returned = (
        [v for v in ret.operands if isinstance(v.type, SecretType)] if ret else []
    )

    def evaluate(assign: tuple[int, ...]) -> tuple[bool, int]:
        deg: dict[int, int] = {}

        def eff(v: Value) -> int:
            v = res(v)
            s = producer.get(v.uid)
            if s is None:
                return 1  # function argument / fresh
            if id(s) in index and assign[index[id(s)]]:
                return 1
            return deg[v.uid]

        for s in compute:
            effs = [eff(v) for v in s.secret_in]
            # rotation key-switching and modulus reduction assume canonical
            # two-part ciphertexts (the noise model prices them that way)
            if s.kind in ("tensor_ext.rotate", "mgmt.mod_reduce") and any(
                d != 1 for d in effs
            ):
                return False, 0
            raw = site_degree(s.kind, effs)
            if raw > MAX_KEY_DEGREE:
                return False, 0
            deg[s.result.uid] = raw
        if any(eff(v) != 1 for v in returned):
            return False, 0
        return True, sum(assign)

    return RelinProblem(fn, cands, evaluate)


def solve(problem: RelinProblem, node_budget: int = DEFAULT_NODE_BUDGET):
    """Exact minimum by branch-and-bound; None if the budget runs out.

    Branching tries "no relin" first; a partial assignment is pruned when
    even relinearizing everywhere else cannot make it feasible, or when it
    already costs as much as the best complete solution.
    """
    n = len(problem.vars)
    baseline = tuple(1 if s.is_ct_ct(_MUL_OPS) else 0 for s in problem.vars)
    feasible, count = problem.evaluate(baseline)
    assert feasible, "relinearizing after every multiplication must be feasible"
    best, best_count = baseline, count
    nodes = 0

    def dfs(prefix: tuple[int, ...]) -> bool:
        nonlocal best, best_count, nodes
        nodes += 1
        if nodes > node_budget:
            return False
        used = sum(prefix)
        if used >= best_count:
            return True  # cannot improve; dominated
        optimistic = prefix + (1,) * (n - len(prefix))
        ok, _ = problem.evaluate(optimistic)
        if not ok:
            return True
        if len(prefix) == n:
            best, best_count = prefix, used
            return True
        return dfs(prefix + (0,)) and dfs(prefix + (1,))

    if not dfs(()):
        return None
    return best, best_count, nodes


def optimize_relinearization(
    module: IrModule, node_budget: int = DEFAULT_NODE_BUDGET
) -> IrModule:
    """Re-place relinearizations at the cheapest feasible set of sites."""
    for fn in module.functions:
        problem = build_problem(fn)
        solution = solve(problem, node_budget)
        if solution is None:
            warnings.warn(
                f"relinearization search for @{fn.name} exceeded the node "
                f"budget ({node_budget}); keeping the existing placement",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        assign, _, _ = solution
        # drop existing relinearizations, rewiring through
        for s in function_sites(fn):
            if s.kind != "mgmt.relinearize":
                continue
            src = s.op.operands[0]  # live value (earlier removals rewired it)
            for op in fn.walk():
                for i, v in enumerate(op.operands):
                    if v is s.result:
                        op.operands[i] = src
            fn.body.ops.remove(s.op)
        for s, bit in zip(problem.vars, assign):
            if bit:
                _insert_after(fn, s.op, "mgmt.relinearize")
    return module


@register_pass("optimize-relinearization")
def _optimize_pass(module: IrModule, node_budget: int = DEFAULT_NODE_BUDGET) -> None:
    optimize_relinearization(module, node_budget=int(node_budget))
